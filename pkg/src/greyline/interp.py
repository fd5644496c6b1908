"""Deterministic interpreter for parsed target programs.

An input is a sequence of calls sharing one persistent storage map.
A failed call (require/assert failure, checked arithmetic error) rolls
back its own storage writes and execution continues with the next
call; fuel exhaustion stops the whole run.

The interpreter compiles each function body to nested closures once,
then replays inputs against that compiled form. Every execution records
a branch trace, a cost vector, and the list of attempted storage writes
(including writes later rolled back, since the write event itself is
what the storage oracle inspects).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from greyline import ir
from greyline.costs import (
    EV_BRANCH,
    EV_OUTCOME,
    TO_FALSE,
    TO_TRUE,
    WRITE,
    CostVector,
    branch_costs,
)

# Call outcome kinds.
RETURNED = 0
REQUIRE_FAILED = 1
ASSERT_FAILED = 2
CHECKED_ERROR = 3
FUEL_EXHAUSTED = 4

OUTCOME_NAMES = {
    RETURNED: "returned",
    REQUIRE_FAILED: "require-failed",
    ASSERT_FAILED: "assert-failed",
    CHECKED_ERROR: "checked-error",
    FUEL_EXHAUSTED: "fuel-exhausted",
}

_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Call:
    fn: int
    args: tuple[int, ...] = ()


@dataclass(frozen=True)
class InputVector:
    calls: tuple[Call, ...]

    def shape(self) -> tuple:
        return tuple((c.fn, len(c.args)) for c in self.calls)

    def slots(self) -> list[tuple[int, int]]:
        """All (call_index, arg_index) pairs."""
        return [(ci, ai) for ci, c in enumerate(self.calls) for ai in range(len(c.args))]

    def get(self, key: tuple[int, int]) -> int:
        return self.calls[key[0]].args[key[1]]

    def replace(self, key: tuple[int, int], value: int) -> "InputVector":
        ci, ai = key
        call = self.calls[ci]
        args = call.args[:ai] + (value,) + call.args[ai + 1:]
        calls = self.calls[:ci] + (Call(call.fn, args),) + self.calls[ci + 1:]
        return InputVector(calls)


@dataclass(frozen=True)
class ExecConfig:
    width: int = 64
    fuel: int = 100_000
    checked: bool = True
    probe_addr: int | None = None


@dataclass
class CallOutcome:
    kind: int
    site: int = -1
    value: int = 0
    detail: str = ""


@dataclass
class ExecutionResult:
    call_outcomes: list[CallOutcome]
    trace: list[tuple[int, int, int]]
    costs: CostVector
    storage_writes: list[tuple[int, int, int]]  # (address, value, site)
    storage: dict[int, int] = field(default_factory=dict)

    def returns(self) -> list[int | None]:
        return [o.value if o.kind == RETURNED else None for o in self.call_outcomes]


class _Return(Exception):
    def __init__(self, value: int):
        self.value = value


class _CallFail(Exception):
    def __init__(self, kind: int, site: int, detail: str = ""):
        self.kind = kind
        self.site = site
        self.detail = detail


class _FuelExhausted(Exception):
    pass


class _Ctx:
    __slots__ = ("storage", "trace", "costs", "writes", "fuel", "probe")

    def __init__(self, fuel: int, probe: int | None):
        self.storage: dict[int, int] = {}
        self.trace: list[tuple[int, int, int]] = []
        self.costs: CostVector = {}
        self.writes: list[tuple[int, int, int]] = []
        self.fuel = fuel
        self.probe = probe


def _scramble(v: int) -> int:
    # splitmix64 finalizer; deliberately opaque to the line-fitting learner
    v = (v + 0x9E3779B97F4A7C15) & _MASK
    v = ((v ^ (v >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    v = ((v ^ (v >> 27)) * 0x94D049BB133111EB) & _MASK
    return v ^ (v >> 31)


class Interpreter:
    """Compiled form of one program under one execution config."""

    def __init__(self, prog: ir.TargetProgram, cfg: ExecConfig = ExecConfig()):
        self.prog = prog
        self.cfg = cfg
        self.max = (1 << (cfg.width - 1)) - 1
        self.min = -(1 << (cfg.width - 1))
        self._wrap_span = 1 << cfg.width
        self._bodies = [
            (fn.params, self._compile_block(fn.body)) for fn in prog.functions
        ]

    # -- public API --------------------------------------------------------

    def run(self, input_vector: InputVector) -> ExecutionResult:
        cfg = self.cfg
        ctx = _Ctx(cfg.fuel, cfg.probe_addr)
        outcomes: list[CallOutcome] = []
        lo, hi = self.min, self.max
        for call in input_vector.calls:
            if not 0 <= call.fn < len(self._bodies):
                raise ValueError(f"invalid function index {call.fn}")
            params, body = self._bodies[call.fn]
            if len(call.args) != len(params):
                raise ValueError(
                    f"function {self.prog.functions[call.fn].name!r} takes "
                    f"{len(params)} arguments, got {len(call.args)}"
                )
            args = call.args
            if any(a < lo or a > hi for a in args):
                args = tuple(self._wrap(a) for a in args)
            env = dict(zip(params, args))
            snapshot = dict(ctx.storage)
            try:
                body(env, ctx)
                outcome = CallOutcome(RETURNED, value=0)
            except _Return as r:
                outcome = CallOutcome(RETURNED, value=r.value)
            except _CallFail as f:
                ctx.storage = snapshot
                outcome = CallOutcome(f.kind, site=f.site, detail=f.detail)
            except _FuelExhausted:
                ctx.storage = snapshot
                outcome = CallOutcome(FUEL_EXHAUSTED)
                outcomes.append(outcome)
                ctx.trace.append((EV_OUTCOME, FUEL_EXHAUSTED, 0))
                break
            outcomes.append(outcome)
            ctx.trace.append((EV_OUTCOME, outcome.kind, outcome.site + 1))
        return ExecutionResult(
            call_outcomes=outcomes,
            trace=ctx.trace,
            costs=ctx.costs,
            storage_writes=ctx.writes,
            storage=ctx.storage,
        )

    # -- compilation -------------------------------------------------------

    def _wrap(self, v: int) -> int:
        return ((v - self.min) % self._wrap_span) + self.min

    def _compile_block(self, stmts: list[ir.Stmt]):
        fns = [self._compile_stmt(s) for s in stmts]

        def run_block(env, ctx):
            for f in fns:
                ctx.fuel -= 1
                if ctx.fuel < 0:
                    raise _FuelExhausted()
                f(env, ctx)

        return run_block

    def _compile_stmt(self, stmt: ir.Stmt):
        if isinstance(stmt, (ir.Let, ir.AssignLocal)):
            name = stmt.name
            vf = self._compile_expr(stmt.value)

            def do_assign(env, ctx):
                env[name] = vf(env, ctx)

            return do_assign
        if isinstance(stmt, ir.StoreCell):
            addr = self.prog.storage(stmt.name).base_addr
            vf = self._compile_expr(stmt.value)
            site = stmt.site

            def do_store_cell(env, ctx):
                self._write(ctx, addr, vf(env, ctx), site)

            return do_store_cell
        if isinstance(stmt, ir.StoreElem):
            decl = self.prog.storage(stmt.name)
            base, elem_base = decl.base_addr, decl.elem_base
            idxf = self._compile_expr(stmt.index)
            vf = self._compile_expr(stmt.value)
            site, check_site = stmt.site, stmt.check_site

            def do_store_elem(env, ctx):
                ui = idxf(env, ctx) & _MASK
                self._bounds_check(ctx, ui, base, check_site)
                self._write(ctx, (elem_base + ui) & _MASK, vf(env, ctx), site)

            return do_store_elem
        if isinstance(stmt, ir.Push):
            decl = self.prog.storage(stmt.name)
            base, elem_base = decl.base_addr, decl.elem_base
            vf = self._compile_expr(stmt.value)
            site = stmt.site

            def do_push(env, ctx):
                old_len = ctx.storage.get(base, 0) & _MASK
                self._write(ctx, (elem_base + old_len) & _MASK, vf(env, ctx), site)
                ctx.storage[base] = self._wrap(old_len + 1)

            return do_push
        if isinstance(stmt, ir.SetLen):
            base = self.prog.storage(stmt.name).base_addr
            vf = self._compile_expr(stmt.value)
            site = stmt.site

            def do_setlen(env, ctx):
                self._write(ctx, base, vf(env, ctx), site)

            return do_setlen
        if isinstance(stmt, ir.If):
            condf = self._compile_cond(stmt.cond, stmt.site)
            thenf = self._compile_block(stmt.then)
            elsf = self._compile_block(stmt.els)

            def do_if(env, ctx):
                if condf(env, ctx):
                    thenf(env, ctx)
                else:
                    elsf(env, ctx)

            return do_if
        if isinstance(stmt, ir.While):
            condf = self._compile_cond(stmt.cond, stmt.site)
            bodyf = self._compile_block(stmt.body)

            def do_while(env, ctx):
                while condf(env, ctx):
                    ctx.fuel -= 1
                    if ctx.fuel < 0:
                        raise _FuelExhausted()
                    bodyf(env, ctx)

            return do_while
        if isinstance(stmt, ir.Require):
            condf = self._compile_cond(stmt.cond, stmt.site)
            site = stmt.site

            def do_require(env, ctx):
                if not condf(env, ctx):
                    raise _CallFail(REQUIRE_FAILED, site)

            return do_require
        if isinstance(stmt, ir.Assert):
            condf = self._compile_cond(stmt.cond, stmt.site)
            site = stmt.site

            def do_assert(env, ctx):
                if not condf(env, ctx):
                    raise _CallFail(ASSERT_FAILED, site)

            return do_assert
        if isinstance(stmt, ir.Return):
            vf = self._compile_expr(stmt.value)

            def do_return(env, ctx):
                raise _Return(vf(env, ctx))

            return do_return
        raise AssertionError(stmt)

    def _compile_cond(self, cmp: ir.CmpExpr, site: int):
        lf = self._compile_expr(cmp.left)
        rf = self._compile_expr(cmp.right)
        op = cmp.op
        kf, kt = (site, TO_FALSE), (site, TO_TRUE)

        def eval_cond(env, ctx):
            cf, ct = branch_costs(op, lf(env, ctx), rf(env, ctx))
            costs = ctx.costs
            prev = costs.get(kf)
            if prev is None or cf < prev:
                costs[kf] = cf
            prev = costs.get(kt)
            if prev is None or ct < prev:
                costs[kt] = ct
            truth = ct == 0
            ctx.trace.append((EV_BRANCH, site, 1 if truth else 0))
            return truth

        return eval_cond

    def _compile_expr(self, expr: ir.Expr):
        if isinstance(expr, ir.Lit):
            value = self._wrap(expr.value)
            return lambda env, ctx: value
        if isinstance(expr, ir.Var):
            name = expr.name
            return lambda env, ctx: env[name]
        if isinstance(expr, ir.LoadCell):
            addr = self.prog.storage(expr.name).base_addr
            return lambda env, ctx: ctx.storage.get(addr, 0)
        if isinstance(expr, ir.LoadElem):
            decl = self.prog.storage(expr.name)
            base, elem_base = decl.base_addr, decl.elem_base
            idxf = self._compile_expr(expr.index)
            check_site = expr.check_site

            def load_elem(env, ctx):
                ui = idxf(env, ctx) & _MASK
                self._bounds_check(ctx, ui, base, check_site)
                return ctx.storage.get((elem_base + ui) & _MASK, 0)

            return load_elem
        if isinstance(expr, ir.Len):
            addr = self.prog.storage(expr.name).base_addr
            return lambda env, ctx: ctx.storage.get(addr, 0)
        if isinstance(expr, ir.Scramble):
            af = self._compile_expr(expr.arg)
            wrap = self._wrap
            return lambda env, ctx: wrap(_scramble(af(env, ctx) & _MASK))
        if isinstance(expr, ir.Neg):
            af = self._compile_expr(expr.arg)
            return self._arith("neg", af, None, expr.site)
        if isinstance(expr, ir.BinOp):
            lf = self._compile_expr(expr.left)
            rf = self._compile_expr(expr.right)
            return self._arith(expr.op, lf, rf, expr.site)
        raise AssertionError(expr)

    def _arith(self, op: str, lf, rf, site: int):
        lo, hi = self.min, self.max
        checked = self.cfg.checked
        wrap = self._wrap

        if op == "neg":

            def neg(env, ctx):
                v = -lf(env, ctx)
                if v > hi:
                    if checked:
                        raise _CallFail(CHECKED_ERROR, site, "overflow")
                    return wrap(v)
                return v

            return neg
        if op in ("+", "-", "*"):
            pyop = {"+": lambda a, b: a + b,
                    "-": lambda a, b: a - b,
                    "*": lambda a, b: a * b}[op]

            def arith(env, ctx):
                v = pyop(lf(env, ctx), rf(env, ctx))
                if v < lo or v > hi:
                    if checked:
                        raise _CallFail(CHECKED_ERROR, site, "overflow")
                    return wrap(v)
                return v

            return arith
        if op in ("/", "%"):
            is_div = op == "/"

            def divmod_(env, ctx):
                a, b = lf(env, ctx), rf(env, ctx)
                if b == 0:
                    raise _CallFail(CHECKED_ERROR, site, "division-by-zero")
                q = abs(a) // abs(b)
                if (a < 0) != (b < 0):
                    q = -q
                if is_div:
                    if q > hi:  # only MIN / -1
                        if checked:
                            raise _CallFail(CHECKED_ERROR, site, "overflow")
                        return wrap(q)
                    return q
                return a - q * b

            return divmod_
        raise AssertionError(op)

    # -- runtime helpers ---------------------------------------------------

    def _bounds_check(self, ctx: _Ctx, u_index: int, base: int, site: int) -> None:
        # EVM-like: index and length compared as unsigned words
        u_len = ctx.storage.get(base, 0) & _MASK
        cf, ct = branch_costs("<", u_index, u_len)
        costs = ctx.costs
        kf, kt = (site, TO_FALSE), (site, TO_TRUE)
        prev = costs.get(kf)
        if prev is None or cf < prev:
            costs[kf] = cf
        prev = costs.get(kt)
        if prev is None or ct < prev:
            costs[kt] = ct
        passed = ct == 0
        ctx.trace.append((EV_BRANCH, site, 1 if passed else 0))
        if not passed:
            raise _CallFail(CHECKED_ERROR, site, "out-of-bounds")

    def _write(self, ctx: _Ctx, addr: int, value: int, site: int) -> None:
        if ctx.probe is not None:
            key = (site, WRITE)
            cost = abs(addr - ctx.probe)
            prev = ctx.costs.get(key)
            if prev is None or cost < prev:
                ctx.costs[key] = cost
        ctx.writes.append((addr, value, site))
        ctx.storage[addr] = value


def execute(prog: ir.TargetProgram, input_vector: InputVector,
            cfg: ExecConfig = ExecConfig()) -> ExecutionResult:
    """One-shot convenience wrapper; campaigns reuse an Interpreter."""
    return Interpreter(prog, cfg).run(input_vector)
