"""Command-line front end.

    rtbyzcast run SCENARIO.yaml [--seed S] [--out events.csv]
    rtbyzcast experiment SPEC.yaml --out DIR [--seed S] [--reps N] [--jobs N]

Exit codes: 0 ok, 1 property violation, 2 usage or configuration error.
Progress goes to stderr; data goes to files.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from pydantic import ValidationError

from .core import ParameterError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 already; keep the message terse
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rtbyzcast", description="Real-time Byzantine reliable broadcast simulator")
    sub = p.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run one scenario and check the broadcast properties")
    run.add_argument("scenario", type=Path)
    run.add_argument("--seed", type=int, default=None, help="override sim.seed")
    run.add_argument("--out", type=Path, default=Path("events.csv"), help="event-log CSV path")
    run.add_argument("--format", choices=["csv"], default="csv")
    run.add_argument("--messages", action="store_true", help="also log every send/receive")
    exp = sub.add_parser("experiment", help="run an experiment grid and write CSVs")
    exp.add_argument("spec", type=Path)
    exp.add_argument("--out", type=Path, required=True, help="output directory")
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--reps", type=int, default=None)
    exp.add_argument("--format", choices=["csv"], default="csv")
    exp.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="accepted for interface stability; grids run sequentially")
    return p


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_run(args) -> int:
    from .config import load_scenario
    from .scenario import run_scenario

    try:
        cfg = load_scenario(args.scenario)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"sim": cfg.sim.model_copy(update={"seed": args.seed})})
    except (OSError, ValidationError, ParameterError, ValueError) as exc:
        _err(f"config error: {exc}")
        return EXIT_USAGE
    world, report = run_scenario(cfg, log_messages=args.messages)
    try:
        world.write_log(args.out)
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc}")
        return EXIT_USAGE
    delivered = sum(1 for e in world.events if e[2] == "deliver")
    _err(f"rounds={world.round} deliveries={delivered} crashed={report.crashed_nodes}: {report.summary()}")
    if not report.ok:
        for prop, msgs in report.violations.items():
            for m in msgs:
                print(f"VIOLATION {prop}: {m}")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .config import load_experiment
    from .experiments import run_spec

    try:
        spec = load_experiment(args.spec)
        if args.seed is not None:
            spec = spec.model_copy(update={"seed": args.seed})
    except (OSError, ValidationError, ParameterError, ValueError) as exc:
        _err(f"config error: {exc}")
        return EXIT_USAGE
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        probe = args.out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        _err(f"output directory not writable: {exc}")
        return EXIT_USAGE
    paths = run_spec(spec, args.out, reps=args.reps, progress=_err)
    for p in paths.values():
        _err(f"wrote {p}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "run":
        return cmd_run(args)
    return cmd_experiment(args)


if __name__ == "__main__":
    raise SystemExit(main())
