"""Command-line front end.

    ike-lab run --config cfg.json [--jobs N] [--out DIR] [--seed N]
    ike-lab selftest
    ike-lab sweep --config cfg.json --axis lambda=0,0.25,0.5,0.75,1.0 [...]
    ike-lab orders --config cfg.json --preset T1..T5 [...]

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, LabError
from .harness import SWEEP_AXES, ExperimentConfig, expand_presets, run, selftest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ike-lab")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        p.add_argument("--out", default=None, help="output directory (overrides config)")

    p_run = sub.add_parser("run", help="execute the configured experiment grid")
    add_common(p_run)
    p_run.add_argument("--seed", type=int, default=None, help="override the seed list with one seed")

    sub.add_parser("selftest", help="run the oracle suites and print max errors")

    p_sweep = sub.add_parser("sweep", help="run with a hyperparameter grid")
    add_common(p_sweep)
    p_sweep.add_argument(
        "--axis", action="append", required=True, metavar="NAME=V0,V1,...",
        help=f"sweep axis; names: {sorted(SWEEP_AXES)}",
    )

    p_orders = sub.add_parser("orders", help="run named camera-order tasks")
    add_common(p_orders)
    p_orders.add_argument("--preset", required=True, help="e.g. T1, T1,T3 or T1..T5")
    return parser


def _parse_axis(text: str) -> tuple[str, list[float]]:
    if "=" not in text:
        raise ConfigError(f"bad axis {text!r}; expected NAME=V0,V1,...")
    name, _, values = text.partition("=")
    name = name.strip()
    if name not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {name!r}; choose from {sorted(SWEEP_AXES)}")
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad values in axis {text!r}: {exc}") from exc
    if not parsed:
        raise ConfigError(f"axis {name!r} has no values")
    return name, parsed


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            report = selftest()
            print(report.format_table())
            return 0 if report.passed else 1
        config = ExperimentConfig.from_file(args.config)
        if args.command == "run":
            if args.seed is not None:
                config.seeds = [args.seed]
        elif args.command == "sweep":
            sweep: dict[str, list[float]] = {}
            for axis_text in args.axis:
                name, values = _parse_axis(axis_text)
                sweep[name] = values
            config.sweep = sweep
        elif args.command == "orders":
            config.orders = expand_presets(args.preset)
        outcome = run(config, out_dir=args.out, jobs=args.jobs)
        if outcome.out_dir is not None:
            print(f"wrote {len(outcome.reports)} runs under {outcome.out_dir}")
        for row in outcome.summary_rows:
            sweep_txt = "".join(f" {a}={v:g}" for a, v in sorted(row["sweep"].items()))
            print(
                f"{row['variant']:<9} {row['order']}{sweep_txt}: "
                f"fmAP {row['fmap_mean']:.4f} +- {row['fmap_std']:.4f}  "
                f"mean-mAP {row['mean_map_mean']:.4f} +- {row['mean_map_std']:.4f}"
            )
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
