"""Command-line harness for the simulation studies.

Subcommands: simulate, fit, kl-table, bounds-check, orthonormality, curves,
rate-study.  Each takes a JSON config (--config) whose keys mirror
`ExperimentConfig`, plus overrides --seed, --reps, --out, --threads.

Exit codes: 0 on success, 2 on a configuration error, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError
from .experiments import (
    ExperimentConfig,
    bounds_check,
    config_from_dict,
    kl_table,
    orthonormality_study,
    posterior_curves,
    rate_study,
    resolve,
    run_experiment,
    simulate,
    write_dataset_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from exc
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.reps is not None:
        raw["replications"] = args.reps
    if args.out is not None:
        raw["out_dir"] = args.out
    if args.threads is not None:
        raw["threads"] = args.threads
    return config_from_dict(raw)


def _cmd_simulate(config: ExperimentConfig) -> None:
    data = simulate(config)
    if config.out_dir is None:
        raise ConfigError("simulate needs an output directory (--out)")
    path = write_dataset_csv(Path(config.out_dir) / "dataset.csv", data)
    print(f"wrote {data.n} observations to {path}")


def _cmd_fit(config: ExperimentConfig) -> None:
    result = run_experiment(config)
    for name in ("kl", "l2_error", "coverage", "mean_width"):
        mean, stderr = result.aggregate(name)
        print(f"{name}: {mean:.6g} (stderr {stderr:.3g})")
    t_exact, _ = result.aggregate("seconds_exact")
    t_var, _ = result.aggregate("seconds_variational")
    print(f"mean fit time: exact {t_exact:.3g} s, variational {t_var:.3g} s")


def _cmd_kl_table(config: ExperimentConfig) -> None:
    rows, rate = kl_table(config)
    for row in rows:
        print(
            f"n={row['n']:6d} m={row['m']:4d} reps={row['reps']:4d} "
            f"KL={row['kl_mean']:9.3f} (sd {row['kl_sd']:.3f})"
        )
    if rate is not None:
        print(f"log-log slope of mean KL vs n: {rate.slope:.4f} "
              f"(stderr {rate.slope_stderr:.4f})")


def _cmd_bounds_check(config: ExperimentConfig) -> None:
    estimates = bounds_check(config)
    for e in estimates:
        print(
            f"{e.quantity:13s} n={e.n:5d} m={e.m:4d} "
            f"mc={e.mc_mean:.5g} (se {e.mc_stderr:.2g}) bound={e.theoretical_bound:.5g}"
        )


def _cmd_orthonormality(config: ExperimentConfig) -> None:
    check = orthonormality_study(config)
    print(
        f"n={check.n} M={check.basis_size} reps={check.replications} "
        f"max normalized deviation={check.deviations.max():.4f} "
        f"median={np.median(check.deviations):.4f}"
    )
    print(
        f"exceedance fraction above C={check.threshold:g}: "
        f"{check.exceedance_fraction:.4f} (bound {check.exceedance_bound:.3g})"
    )


def _cmd_curves(config: ExperimentConfig) -> None:
    rows = posterior_curves(config)
    print(f"wrote {rows.shape[0]} grid rows"
          + (f" to {Path(config.out_dir) / 'curves.csv'}" if config.out_dir else ""))


def _cmd_rate_study(config: ExperimentConfig) -> None:
    rows, rate = rate_study(config)
    for row in rows:
        print(
            f"n={row['n']:6d} m={row['m']:4d} reps={row['reps']:4d} "
            f"L2={row['l2_mean']:.5g} (se {row['l2_stderr']:.2g})"
        )
    if rate is not None:
        print(f"log-log slope of mean L2 error vs n: {rate.slope:.4f} "
              f"(stderr {rate.slope_stderr:.4f})")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "kl-table": _cmd_kl_table,
    "bounds-check": _cmd_bounds_check,
    "orthonormality": _cmd_orthonormality,
    "curves": _cmd_curves,
    "rate-study": _cmd_rate_study,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigengp",
        description="Sparse variational GP regression studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config path", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory for CSV files")
        p.add_argument("--threads", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve(_load_config(args))
        _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
