"""Campaign engine: corpus, energy schedule, mutation, and the fuzz loop.

With learning enabled the loop runs the learned-inputs-first variant:
a pending learned input is always the next execution, even after the
current input's energy has run out, and the learner is consulted only
while energy remains. With learning disabled the loop degenerates to
plain coverage-guided fuzzing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from random import Random
from typing import Callable

from greyline import detectors, ir
from greyline.costs import EV_BRANCH, CostVector, path_id
from greyline.detectors import Bug, BugLedger
from greyline.interp import Call, ExecConfig, ExecutionResult, InputVector, Interpreter
from greyline.learner import LearnedInput, learn

_MASK = (1 << 64) - 1


@dataclass
class CorpusEntry:
    pid: int
    input: InputVector
    costs: CostVector


@dataclass
class Corpus:
    entries: dict[int, CorpusEntry] = field(default_factory=dict)
    insertion_order: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, pid: int) -> bool:
        return pid in self.entries

    def add(self, pid: int, input_vector: InputVector, costs: CostVector) -> CorpusEntry:
        if pid in self.entries:
            raise ValueError(f"path {pid:#x} already in corpus")
        entry = CorpusEntry(pid, input_vector, costs)
        self.entries[pid] = entry
        self.insertion_order.append(pid)
        return entry


@dataclass
class CampaignConfig:
    rng_seed: int = 0
    time_limit: float | None = None
    max_execs: int | None = None
    learning_enabled: bool = True
    max_calls: int = 3
    width: int = 64
    fuel: int = 100_000
    energy_base: int = 16
    energy_cap: int = 1024
    p_structural: float = 0.1
    mutation_weights: dict[str, float] = field(default_factory=lambda: {
        "bitflip": 0.2, "addsub": 0.25, "interesting": 0.2, "random": 0.35,
    })
    metric_strategy: str = "random"  # or "rarest-site"
    pick_strategy: str = "random"  # or "rarity"
    probe_addr: int | None = None
    ignore_entry_requires: bool = False
    stop_on_bug_kinds: tuple[str, ...] = ()
    stop_on_pids: frozenset[int] = frozenset()
    log_execs: bool = False


@dataclass
class Hooks:
    """Override points for scripted/deterministic campaigns (tests)."""

    pick: Callable[[Corpus, Random], CorpusEntry] | None = None
    fuzz: Callable[[InputVector, Random], InputVector] | None = None
    select_metric: Callable[[list], object] | None = None
    assign_energy: Callable[[CorpusEntry, int], int] | None = None


@dataclass
class Event:
    seconds: float
    execs: int
    kind: str  # new-path | bug | learn-success | learn-fail | exec
    data: dict = field(default_factory=dict)


@dataclass
class CampaignStats:
    execs: int = 0
    paths: int = 0
    bugs: int = 0
    learn_success: int = 0
    learn_fail: int = 0
    seconds: float = 0.0

    @property
    def learn_rate(self) -> float | None:
        total = self.learn_success + self.learn_fail
        return self.learn_success / total if total else None


@dataclass
class CampaignResult:
    corpus: Corpus
    bugs: list[Bug]
    stats: CampaignStats
    events: list[Event]
    probe_addr: int | None = None


# ---------------------------------------------------------------------------
# Mutation
# ---------------------------------------------------------------------------


def interesting_values(width: int) -> list[int]:
    hi = (1 << (width - 1)) - 1
    lo = -(1 << (width - 1))
    vals = {0, 1, -1, hi, lo}
    for k in (3, 7, 15, 31, width - 1):
        p = 1 << k
        vals.update((p, p - 1, p + 1, -p, -p + 1))
    return sorted(v for v in vals if lo <= v <= hi)


def random_value(rng: Random, width: int) -> int:
    """Magnitude-biased random integer: small values are common."""
    if rng.random() < 0.5:
        bits = rng.randint(1, min(16, width - 1))
    else:
        bits = rng.randint(1, width - 1)
    v = rng.getrandbits(bits)
    return -v if rng.random() < 0.5 else v


def _wrap(v: int, width: int) -> int:
    lo = -(1 << (width - 1))
    return ((v - lo) % (1 << width)) + lo


class Mutator:
    """Weighted single-slot and structural mutations over input vectors."""

    def __init__(self, prog: ir.TargetProgram, cfg: CampaignConfig):
        self.prog = prog
        self.cfg = cfg
        self.width = cfg.width
        self.interesting = interesting_values(cfg.width)
        items = list(cfg.mutation_weights.items())
        self.ops = [name for name, _ in items]
        total = sum(w for _, w in items)
        acc, self.cum = 0.0, []
        for _, w in items:
            acc += w / total
            self.cum.append(acc)

    def mutate_value(self, old: int, rng: Random) -> int:
        width = self.width
        for _ in range(64):
            x = rng.random()
            i = 0
            while x > self.cum[i]:
                i += 1
            op = self.ops[i]
            if op == "bitflip":
                new = _wrap(old ^ (1 << rng.randrange(width)), width)
            elif op == "addsub":
                delta = rng.randint(1, 64)
                new = _wrap(old + (delta if rng.random() < 0.5 else -delta), width)
            elif op == "interesting":
                new = self.interesting[rng.randrange(len(self.interesting))]
            else:
                new = random_value(rng, width)
            if new != old:
                return new
        return _wrap(old + 1, width)

    def random_call(self, rng: Random) -> Call:
        fn = rng.randrange(len(self.prog.functions))
        nargs = len(self.prog.functions[fn].params)
        return Call(fn, tuple(random_value(rng, self.width) for _ in range(nargs)))

    def fuzz(self, input_vector: InputVector, rng: Random) -> InputVector:
        """Mutate one integer slot, or (rarely) the call structure."""
        slots = input_vector.slots()
        structural = rng.random() < self.cfg.p_structural or not slots
        if structural:
            calls = list(input_vector.calls)
            choice = rng.randrange(3)
            if choice == 0 and len(calls) < self.cfg.max_calls:
                calls.insert(rng.randrange(len(calls) + 1), self.random_call(rng))
            elif choice == 1 and len(calls) > 1:
                calls.pop(rng.randrange(len(calls)))
            else:
                calls[rng.randrange(len(calls))] = self.random_call(rng)
            mutant = InputVector(tuple(calls))
            if mutant != input_vector:
                return mutant
            if not slots:
                # zero-arg singleton where replace drew the same call; force append
                calls.append(self.random_call(rng))
                return InputVector(tuple(calls))
        key = slots[rng.randrange(len(slots))]
        return input_vector.replace(key, self.mutate_value(input_vector.get(key), rng))


def fuzz_input(input_vector: InputVector, rng: Random, prog: ir.TargetProgram,
               cfg: CampaignConfig) -> InputVector:
    return Mutator(prog, cfg).fuzz(input_vector, rng)


# ---------------------------------------------------------------------------
# Schedule and selection
# ---------------------------------------------------------------------------


def assign_energy(times_selected: int, base: int = 16, cap: int = 1024) -> int:
    """AFLFast-style exponential ramp: base * 2^selections, clamped."""
    if times_selected >= (cap // base).bit_length():
        return cap
    return max(base, min(cap, base << times_selected))


def pick_input(corpus: Corpus, rng: Random, pick_counts: dict[int, int],
               strategy: str = "random") -> CorpusEntry:
    order = corpus.insertion_order
    if strategy == "rarity":
        weights = [1.0 / (1 + pick_counts.get(pid, 0)) for pid in order]
        pid = rng.choices(order, weights)[0]
    else:
        pid = order[rng.randrange(len(order))]
    pick_counts[pid] = pick_counts.get(pid, 0) + 1
    return corpus.entries[pid]


def synthesize_seed(prog: ir.TargetProgram, rng: Random,
                    cfg: CampaignConfig) -> InputVector:
    """One minimal sequence: one call per function, random args."""
    calls = []
    for fn, fndef in enumerate(prog.functions[:cfg.max_calls]):
        calls.append(Call(fn, tuple(random_value(rng, cfg.width)
                                    for _ in fndef.params)))
    return InputVector(tuple(calls))


def draw_probe_addr(rng: Random, excluded: set[int]) -> int:
    while True:
        addr = rng.getrandbits(64)
        if addr not in excluded:
            return addr


# ---------------------------------------------------------------------------
# Campaign
# ---------------------------------------------------------------------------


class _Budget:
    def __init__(self, cfg: CampaignConfig, start: float):
        self.cfg = cfg
        self.start = start
        self.stopped = False

    def done(self, execs: int) -> bool:
        if self.stopped:
            return True
        cfg = self.cfg
        if cfg.max_execs is not None and execs >= cfg.max_execs:
            return True
        if cfg.time_limit is not None and time.monotonic() - self.start >= cfg.time_limit:
            return True
        return False


def run_seeds(seeds: list[InputVector], interpreter: Interpreter,
              state: "_CampaignState") -> None:
    for seed in seeds:
        _execute_one(seed, interpreter, state, learned=None)


@dataclass
class _CampaignState:
    cfg: CampaignConfig
    prog: ir.TargetProgram
    corpus: Corpus
    ledger: BugLedger
    events: list[Event]
    stats: CampaignStats
    budget: _Budget
    probe_addr: int | None
    observed_directions: set[tuple[int, int]] = field(default_factory=set)

    def now(self) -> float:
        return time.monotonic() - self.budget.start


def _execute_one(input_vector: InputVector, interpreter: Interpreter,
                 state: _CampaignState,
                 learned: LearnedInput | None) -> tuple[int, ExecutionResult]:
    cfg = state.cfg
    result = interpreter.run(input_vector)
    state.stats.execs += 1
    execs = state.stats.execs
    seconds = state.now()
    pid = path_id(result.trace)

    for tag, a, b in result.trace:
        if tag == EV_BRANCH:
            state.observed_directions.add((a, b))

    if cfg.log_execs:
        state.events.append(Event(seconds, execs, "exec", {
            "input": _input_data(input_vector, state.prog),
            "pid": pid,
            "learned": learned is not None,
            "returns": result.returns(),
            "costs": sorted((s, d, c) for (s, d), c in result.costs.items()),
        }))

    if pid not in state.corpus:
        state.corpus.add(pid, input_vector, result.costs)
        state.stats.paths += 1
        state.events.append(Event(seconds, execs, "new-path", {"pid": pid}))
        if cfg.stop_on_pids and cfg.stop_on_pids <= state.corpus.entries.keys():
            state.budget.stopped = True

    for kind, site, detail in detectors.classify(
            result, state.probe_addr, state.prog.entry_require_sites,
            cfg.ignore_entry_requires):
        bug = state.ledger.report(kind, site, detail, input_vector, seconds, execs)
        if bug is not None:
            state.stats.bugs += 1
            state.events.append(Event(seconds, execs, "bug", {
                "id": bug.id, "kind": kind, "site": site,
            }))
            if kind in cfg.stop_on_bug_kinds:
                state.budget.stopped = True

    if learned is not None:
        # success: the targeted metric was driven to zero by the new input
        if result.costs.get(learned.metric) == 0:
            state.stats.learn_success += 1
            state.events.append(Event(seconds, execs, "learn-success",
                                      {"metric": list(learned.metric)}))
        else:
            state.stats.learn_fail += 1
            state.events.append(Event(seconds, execs, "learn-fail",
                                      {"metric": list(learned.metric)}))
    return pid, result


def _input_data(input_vector: InputVector, prog: ir.TargetProgram) -> list[dict]:
    return [{"fn": prog.functions[c.fn].name, "args": list(c.args)}
            for c in input_vector.calls]


def campaign(prog: ir.TargetProgram, seeds: list[InputVector] | None,
             cfg: CampaignConfig, hooks: Hooks | None = None) -> CampaignResult:
    """Run one fuzzing campaign to its exec/time budget."""
    hooks = hooks or Hooks()
    rng = Random(cfg.rng_seed)
    probe = cfg.probe_addr
    if probe is None:
        probe = draw_probe_addr(rng, prog.base_addresses)
    interpreter = Interpreter(prog, ExecConfig(width=cfg.width, fuel=cfg.fuel,
                                               probe_addr=probe))
    start = time.monotonic()
    budget = _Budget(cfg, start)
    state = _CampaignState(cfg=cfg, prog=prog, corpus=Corpus(),
                           ledger=BugLedger(), events=[],
                           stats=CampaignStats(), budget=budget,
                           probe_addr=probe)
    mutator = Mutator(prog, cfg)

    if not seeds:
        seeds = [synthesize_seed(prog, rng, cfg)]
    run_seeds(seeds, interpreter, state)

    pick_counts: dict[int, int] = {}
    while not budget.done(state.stats.execs) and len(state.corpus) > 0:
        if hooks.pick is not None:
            entry = hooks.pick(state.corpus, rng)
            pick_counts[entry.pid] = pick_counts.get(entry.pid, 0) + 1
        else:
            entry = pick_input(state.corpus, rng, pick_counts, cfg.pick_strategy)
        if hooks.assign_energy is not None:
            max_energy = hooks.assign_energy(entry, pick_counts.get(entry.pid, 1))
        else:
            max_energy = assign_energy(pick_counts.get(entry.pid, 1) - 1,
                                       cfg.energy_base, cfg.energy_cap)
        energy = 0
        pending: LearnedInput | None = None
        tried: set = set()
        while energy < max_energy or pending is not None:
            if pending is not None:
                candidate, learned_tag = pending.input, pending
                pending = None
            else:
                if hooks.fuzz is not None:
                    candidate = hooks.fuzz(entry.input, rng)
                else:
                    candidate = mutator.fuzz(entry.input, rng)
                learned_tag = None
            _pid, result = _execute_one(candidate, interpreter, state, learned_tag)
            if budget.done(state.stats.execs):
                break
            if cfg.learning_enabled and energy < max_energy:
                select = hooks.select_metric
                pending = learn(
                    entry.input, entry.costs, candidate, result.costs, rng,
                    width=cfg.width, strategy=cfg.metric_strategy,
                    observed_directions=state.observed_directions,
                    tried=tried,
                ) if select is None else _learn_scripted(
                    entry.input, entry.costs, candidate, result.costs,
                    select, cfg.width, tried)
                if pending is not None and cfg.log_execs:
                    state.events.append(Event(
                        state.now(), state.stats.execs, "learn-proposed",
                        {"input": _input_data(pending.input, prog),
                         "metric": list(pending.metric)}))
            energy += 1

    state.stats.seconds = state.now()
    return CampaignResult(corpus=state.corpus, bugs=state.ledger.bugs,
                          stats=state.stats, events=state.events,
                          probe_addr=probe)


def _learn_scripted(input0, cost0, input1, cost1, select, width, tried):
    """Learn with a scripted metric choice (replay fixtures)."""
    from greyline.learner import diff_single_param, fit_and_solve, LearnedInput

    key = diff_single_param(input0, input1)
    if key is None:
        return None
    candidates = sorted(
        k for k, c0 in cost0.items()
        if c0 > 0 and (c1 := cost1.get(k)) is not None and c1 > 0 and c0 != c1
    )
    if not candidates:
        return None
    metric = select(candidates)
    if metric is None:
        return None
    value = fit_and_solve(input0.get(key), cost0[metric],
                          input1.get(key), cost1[metric], width)
    if value is None or value == input0.get(key) or value == input1.get(key):
        return None
    mark = (key, metric, value)
    if mark in tried:
        return None
    tried.add(mark)
    return LearnedInput(input0.replace(key, value), key, metric, value)
