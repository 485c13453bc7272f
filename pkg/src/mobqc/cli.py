"""Command line entry point.

Subcommands: ``run``, ``sweep``, ``verify-bounds``, ``twirl-check``.
Exit status is 0 on success, 1 when an invariant fails and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import checks
from .config import SWEEP_AXES, ConfigError, ExperimentConfig, load_config
from .graphs import GraphError
from .records import render
from .runner import run_experiment, run_sweep

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="TOML experiment file")
    p.add_argument("--preset", help="built-in experiment (honest, replace-input, pauli-channel, "
                                    "wrong-graph, mixed-state)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    p.add_argument("--mode", choices=("sample", "exact"))
    p.add_argument("--trials", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobqc", description="Measurement-only verifiable blind computation simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="estimate acceptance for one configuration")
    _add_common(run)
    run.add_argument("--q", help="compute-branch probability, or 'optimal'")
    run.add_argument("--workers", type=int)
    run.add_argument("--timing", action="store_true", help="include wall time in the record")
    run.add_argument("--transcript", metavar="PATH", help="write per-trial JSON lines (sample mode)")

    sweep = sub.add_parser("sweep", help="one record per value of a parameter")
    _add_common(sweep)
    sweep.add_argument("--axis", choices=SWEEP_AXES)
    sweep.add_argument("--values", help="comma-separated grid, e.g. 0,0.25,0.5")
    sweep.add_argument("--timing", action="store_true")

    verify = sub.add_parser("verify-bounds", help="run the registered invariant suites")
    _add_common(verify)
    verify.add_argument("--suite", action="append", choices=sorted(checks.REGISTRY),
                        help="restrict to a suite (repeatable)")

    tw = sub.add_parser("twirl-check", help="run the twirl suite at the configured input")
    _add_common(tw)
    return parser


def _overrides(args) -> dict:
    out = {"seed": args.seed, "mode": args.mode, "trials": args.trials}
    if getattr(args, "format", None):
        out["output.format"] = args.format
    if getattr(args, "q", None) is not None:
        try:
            out["q"] = args.q if args.q == "optimal" else float(args.q)
        except ValueError as exc:
            raise ConfigError("--q", f"expected a number or 'optimal', got {args.q!r}") from exc
    if getattr(args, "workers", None) is not None:
        out["workers"] = args.workers
    return out


def _load(args) -> ExperimentConfig:
    return load_config(args.config, args.preset, _overrides(args))


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_values(text: str, axis: str) -> list:
    try:
        items = [v.strip() for v in text.split(",") if v.strip()]
        return [int(v) for v in items] if axis in ("r", "trials") else [float(v) for v in items]
    except ValueError as exc:
        raise ConfigError("--values", f"cannot parse {text!r} for axis {axis}") from exc


def cmd_run(args) -> int:
    cfg = _load(args)
    transcript = None
    if args.transcript:
        transcript = open(args.transcript, "w", encoding="utf-8")

    def write(rec: dict) -> None:
        transcript.write(json.dumps(rec, sort_keys=True) + "\n")

    try:
        record = run_experiment(cfg, timing=args.timing, on_record=write if transcript else None)
    finally:
        if transcript:
            transcript.close()
    _emit(render([record], args.format or cfg.out_format), args.out or cfg.out_path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    axis = args.axis or cfg.sweep_axis
    if axis is None:
        raise ConfigError("sweep.axis", "no sweep axis given (--axis or [sweep] axis)")
    values = _parse_values(args.values, axis) if args.values else cfg.sweep_values
    result = run_sweep(cfg, axis, values, timing=args.timing)
    _emit(render(result.records, args.format or cfg.out_format), args.out or cfg.out_path)
    if result.crossover is not None:
        print(f"gap crossover: a - b - delta changes sign at epsilon = {result.crossover:.10g} "
              f"(r = {cfg.r})", file=sys.stderr)
    return EXIT_OK


def _report(results: list, args) -> int:
    fmt = args.format
    if fmt == "json":
        text = json.dumps([r.as_dict() for r in results], indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        lines = ["suite,name,lhs,relation,rhs,passed,detail"]
        for r in results:
            lines.append(f'{r.suite},{r.name},{r.lhs!r},{r.relation},{r.rhs!r},{r.passed},"{r.detail}"')
        text = "\n".join(lines) + "\n"
    else:
        n_fail = sum(not r.passed for r in results)
        text = "\n".join(r.line() for r in results)
        text += f"\n{len(results) - n_fail}/{len(results)} checks passed\n"
    _emit(text, args.out)
    return EXIT_INVARIANT if any(not r.passed for r in results) else EXIT_OK


def _context(cfg: ExperimentConfig) -> checks.CheckContext:
    return checks.CheckContext(seed=cfg.seed, graph=cfg.graph, input_block=cfg.input_block,
                               generators=cfg.generators, r=cfg.r)


def cmd_verify_bounds(args) -> int:
    cfg = _load(args)
    return _report(checks.run_all(_context(cfg), args.suite), args)


def cmd_twirl_check(args) -> int:
    cfg = _load(args)
    return _report(checks.run_suite("twirl", _context(cfg)), args)


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify-bounds": cmd_verify_bounds,
            "twirl-check": cmd_twirl_check}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GraphError as exc:
        # generator overrides are parsed leniently and rejected here
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
