"""Command-line entry point: ``simgate run | sweep | spectrum``.

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures (non-convergence, near-resonant elimination, tracking loss).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (NUMERICAL_ERRORS, PRESETS, SWEEP_VARIABLES, ConfigError, RunConfig,
                          SweepSpec, rows_to_csv, run_gate, run_sweep, spectrum_trace)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    p.add_argument("--model", choices=("ideal", "effective", "exact"), help="override the model tier")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simgate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="simulate one gate and write a JSON report"))
    sw = sub.add_parser("sweep", help="scan one variable and write CSV rows")
    _add_common(sw)
    sw.add_argument("--sweep", required=True, choices=SWEEP_VARIABLES)
    sw.add_argument("--min", type=float, required=True)
    sw.add_argument("--max", type=float, required=True)
    sw.add_argument("--points", type=int, default=8)
    sw.add_argument("--log", action="store_true", help="logarithmic spacing")
    sw.add_argument("--workers", type=int, default=None, help="process-pool width")
    sp = sub.add_parser("spectrum", help="write the instantaneous spectrum as CSV")
    _add_common(sp)
    sp.add_argument("--samples", type=int, default=256, help="samples per segment")
    return parser


def load_config(args) -> RunConfig:
    base = PRESETS[args.preset] if args.preset else None
    data: dict = {}
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    elif base is None:
        raise ConfigError("give --config or --preset")
    if args.model:
        data = dict(data, model=args.model)
    return RunConfig.from_dict(data, base)


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8", newline="")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "run":
            _write(run_gate(cfg).to_json(), args.out)
        elif args.command == "sweep":
            spec = SweepSpec(args.sweep, args.min, args.max, args.points,
                             "log" if args.log else "linear", cfg)
            _write(rows_to_csv(run_sweep(spec, args.workers)), args.out)
        else:
            rows = spectrum_trace(cfg, samples=args.samples)
            _write(rows_to_csv(rows, header=list(rows[0])), args.out)
    except ConfigError as exc:
        print(f"simgate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"simgate: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
