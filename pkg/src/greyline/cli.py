"""Command-line front end.

Subcommands:
    fuzz     run one campaign on a target and write a report directory
    compare  paired learning-on/learning-off campaigns with matched seeds
    replay   re-execute a bug witness or a test-suite input
    bench    run every built-in benchmark target once

Targets are .ir files; a bare name like `bar.ir` falls back to the
built-in corpus shipped with the package.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from importlib import resources
from pathlib import Path

from greyline import detectors, ir
from greyline.engine import CampaignConfig, campaign
from greyline.interp import ExecConfig, Interpreter
from greyline.costs import path_id
from greyline.report import emit_report, input_from_data

BUILTIN_TARGETS = [
    "bar.ir", "wallet.ir", "nested_eq.ir",
    "clean_branches.ir", "clean_loop.ir", "hashy.ir",
]


class CliError(Exception):
    pass


def load_target(spec: str) -> ir.TargetProgram:
    path = Path(spec)
    if path.exists():
        text = path.read_text()
    elif spec in BUILTIN_TARGETS:
        text = resources.files("greyline.targets").joinpath(spec).read_text()
        path = Path(spec)
    else:
        raise CliError(f"target not found: {spec}")
    try:
        return ir.parse_program(text, name=path.stem, source_path=str(path))
    except ir.ParseError as exc:
        raise CliError(f"cannot parse {spec}: {exc}") from exc


def _config_from_args(args, learning: bool | None = None) -> CampaignConfig:
    return CampaignConfig(
        rng_seed=args.seed,
        time_limit=args.time_limit,
        max_execs=args.max_execs,
        learning_enabled=args.learning == "on" if learning is None else learning,
        max_calls=args.max_calls,
        metric_strategy=args.metric_strategy,
        ignore_entry_requires=args.ignore_entry_requires,
    )


def cmd_fuzz(args) -> int:
    prog = load_target(args.target)
    cfg = _config_from_args(args)
    result = campaign(prog, None, cfg)
    report = emit_report(result, cfg, prog, args.out, target_path=args.target)
    rate = "-" if report.learn_rate is None else f"{report.learn_rate:.2f}"
    print(f"{prog.name}: P={report.paths} B={report.bugs} E={report.execs} "
          f"S_L={report.learn_success} F_L={report.learn_fail} R_L={rate}")
    print(f"report written to {args.out}")
    return 0


def cmd_compare(args) -> int:
    prog = load_target(args.target)
    rows = []
    for trial in range(args.trials):
        seed = args.seed + trial
        results = {}
        for label, learning in (("off", False), ("on", True)):
            cfg = _config_from_args(args, learning=learning)
            cfg.rng_seed = seed
            results[label] = campaign(prog, None, cfg)
        off, on = results["off"].stats, results["on"].stats
        rows.append({
            "trial": trial, "seed": seed,
            "P": off.paths, "P_L": on.paths,
            "B": off.bugs, "B_L": on.bugs,
            "E": off.execs, "E_L": on.execs,
            "S_L": on.learn_success, "F_L": on.learn_fail,
            "R_L": on.learn_rate,
        })
    cols = ["trial", "P", "P_L", "B", "B_L", "E", "E_L", "S_L", "F_L", "R_L"]
    print("  ".join(f"{c:>6}" for c in cols))
    for row in rows:
        print("  ".join(_cell(row[c]) for c in cols))
    med = {c: statistics.median(row[c] for row in rows)
           for c in cols[1:-1]}
    print("median  " + "  ".join(_cell(med[c]) for c in cols[1:-1]))
    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=2) + "\n")
        print(f"trial data written to {args.out}")
    return 0


def _cell(v) -> str:
    if v is None:
        return f"{'-':>6}"
    if isinstance(v, float):
        return f"{v:6.2f}"
    return f"{v:6d}"


def cmd_replay(args) -> int:
    report = json.loads(Path(args.report).read_text())
    target = args.target or report["target_path"]
    prog = load_target(target)
    if args.bug:
        matches = [b for b in report["bugs"] if b["id"] == args.bug]
        if not matches:
            raise CliError(f"no bug with id {args.bug!r} in {args.report}")
        data = matches[0]["witness"]
    elif args.input:
        data = json.loads(Path(args.input).read_text())
    else:
        raise CliError("replay needs --bug or --input")
    input_vector = input_from_data(data, prog)
    interp = Interpreter(prog, ExecConfig(probe_addr=report.get("probe_addr")))
    result = interp.run(input_vector)
    pid = path_id(result.trace)
    findings = detectors.classify(result, report.get("probe_addr"),
                                  prog.entry_require_sites)
    print(f"pid={pid:016x} returns={result.returns()}")
    for kind, site, detail in findings:
        print(f"bug: {kind}@{site} {detail}")
    if not findings:
        print("no findings")
    return 0


def cmd_bench(args) -> int:
    print(f"{'target':<16}{'P':>6}{'B':>4}{'E':>9}{'S_L':>7}{'F_L':>7}{'R_L':>6}")
    for name in BUILTIN_TARGETS:
        prog = load_target(name)
        cfg = CampaignConfig(rng_seed=args.seed, max_execs=args.max_execs,
                             learning_enabled=args.learning == "on")
        result = campaign(prog, None, cfg)
        s = result.stats
        rate = "-" if s.learn_rate is None else f"{s.learn_rate:.2f}"
        print(f"{prog.name:<16}{s.paths:>6}{s.bugs:>4}{s.execs:>9}"
              f"{s.learn_success:>7}{s.learn_fail:>7}{rate:>6}")
    return 0


def _add_campaign_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--learning", choices=["on", "off"], default="on")
    p.add_argument("--time-limit", type=float, default=None, metavar="S")
    p.add_argument("--max-execs", type=int, default=100_000, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--max-calls", type=int, default=3, metavar="N")
    p.add_argument("--metric-strategy", choices=["random", "rarest-site"],
                   default="random")
    p.add_argument("--ignore-entry-requires", action="store_true",
                   help="do not count failures of a function's leading "
                        "requires as bugs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greyline",
                                     description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuzz", help="run one fuzzing campaign")
    p.add_argument("target")
    _add_campaign_args(p)
    p.add_argument("--out", default="out", metavar="DIR")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("compare", help="paired learning-on/off campaigns")
    p.add_argument("target")
    p.add_argument("--trials", type=int, default=10, metavar="K")
    _add_campaign_args(p)
    p.add_argument("--out", default=None, metavar="FILE")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("replay", help="re-execute a recorded input")
    p.add_argument("report")
    p.add_argument("--bug", default=None, metavar="ID")
    p.add_argument("--input", default=None, metavar="FILE")
    p.add_argument("--target", default=None)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench", help="run the built-in benchmark corpus")
    p.add_argument("--max-execs", type=int, default=20_000, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--learning", choices=["on", "off"], default="on")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
