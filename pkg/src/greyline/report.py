"""Campaign reporting: JSON report, CSV artifacts, test suite dump."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from greyline import ir
from greyline.engine import CampaignConfig, CampaignResult
from greyline.interp import Call, InputVector


@dataclass
class CampaignReport:
    target: str
    target_path: str
    learning_enabled: bool
    rng_seed: int
    paths: int
    bugs: int
    execs: int
    learn_success: int
    learn_fail: int
    learn_rate: float | None
    seconds: float
    probe_addr: int | None
    coverage_series: list[tuple[float, int, int]]  # (seconds, execs, paths)
    bug_list: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "target_path": self.target_path,
            "learning_enabled": self.learning_enabled,
            "rng_seed": self.rng_seed,
            "P": self.paths,
            "B": self.bugs,
            "E": self.execs,
            "S_L": self.learn_success,
            "F_L": self.learn_fail,
            "R_L": self.learn_rate,
            "seconds": self.seconds,
            "probe_addr": self.probe_addr,
            "coverage_series": [list(row) for row in self.coverage_series],
            "bugs": self.bug_list,
        }


def input_to_data(input_vector: InputVector, prog: ir.TargetProgram) -> list[dict]:
    return [{"fn": prog.functions[c.fn].name, "args": list(c.args)}
            for c in input_vector.calls]


def input_from_data(data: list[dict], prog: ir.TargetProgram) -> InputVector:
    calls = tuple(Call(prog.function_index(c["fn"]), tuple(int(a) for a in c["args"]))
                  for c in data)
    return InputVector(calls)


def build_report(result: CampaignResult, cfg: CampaignConfig,
                 prog: ir.TargetProgram, target_path: str = "") -> CampaignReport:
    series = []
    paths = 0
    for ev in result.events:
        if ev.kind == "new-path":
            paths += 1
            series.append((ev.seconds, ev.execs, paths))
    bug_list = [{
        "id": bug.id,
        "kind": bug.kind,
        "site": bug.site,
        "seconds": bug.first_seen_seconds,
        "execs": bug.first_seen_execs,
        "detail": bug.detail,
        "witness": input_to_data(bug.witness, prog),
    } for bug in result.bugs]
    return CampaignReport(
        target=prog.name,
        target_path=target_path,
        learning_enabled=cfg.learning_enabled,
        rng_seed=cfg.rng_seed,
        paths=result.stats.paths,
        bugs=result.stats.bugs,
        execs=result.stats.execs,
        learn_success=result.stats.learn_success,
        learn_fail=result.stats.learn_fail,
        learn_rate=result.stats.learn_rate,
        seconds=result.stats.seconds,
        probe_addr=result.probe_addr,
        coverage_series=series,
        bug_list=bug_list,
    )


def emit_report(result: CampaignResult, cfg: CampaignConfig, prog: ir.TargetProgram,
                out_dir: str | Path, target_path: str = "") -> CampaignReport:
    """Write report.json, coverage.csv, bugs.csv, events.jsonl, testsuite/."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        report = build_report(result, cfg, prog, target_path)
        (out / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")

        lines = ["seconds,execs,paths"]
        lines += [f"{s:.3f},{e},{p}" for s, e, p in report.coverage_series]
        (out / "coverage.csv").write_text("\n".join(lines) + "\n")

        lines = ["bug_id,kind,site,seconds,execs"]
        lines += [f"{b['id']},{b['kind']},{b['site']},{b['seconds']:.3f},{b['execs']}"
                  for b in report.bug_list]
        (out / "bugs.csv").write_text("\n".join(lines) + "\n")

        with (out / "events.jsonl").open("w") as fh:
            for ev in result.events:
                fh.write(json.dumps({
                    "seconds": round(ev.seconds, 3),
                    "execs": ev.execs,
                    "event": ev.kind,
                    **ev.data,
                }) + "\n")

        suite = out / "testsuite"
        suite.mkdir(exist_ok=True)
        for i, pid in enumerate(result.corpus.insertion_order):
            entry = result.corpus.entries[pid]
            path = suite / f"{i:04d}_{pid:016x}.json"
            path.write_text(json.dumps(input_to_data(entry.input, prog)) + "\n")
        return report
    except OSError as exc:
        raise OSError(f"failed writing report under {out}: {exc}") from exc
