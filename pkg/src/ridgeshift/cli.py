"""Command-line interface.

Subcommands: ``artificial`` (variance-shift table), ``heart`` (cross-hospital
table; needs the four UCI files), ``curves`` (population target-MSE curves).
Flags override config-file values, which override defaults.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 estimation
failures exceeding the configured failure budget.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ExperimentConfig, build_config, read_config_file
from .errors import ConfigurationError, ParseError, RidgeshiftError
from .experiments import (
    emit_mse_curves,
    emit_table,
    run_artificial,
    run_heart,
    write_manifest,
)
from .shift import variance_shift_problem


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, help="master random seed")
    parser.add_argument("--out-dir", help="output directory (default '.')")
    parser.add_argument(
        "--format",
        help="comma-separated output formats: csv,markdown",
    )
    parser.add_argument(
        "--estimators",
        help="comma-separated importance-weight estimators: rG,KLIEP,KMM,NN",
    )
    parser.add_argument("--repeats", type=int, help="number of repeats")
    parser.add_argument("--jobs", type=int, help="worker processes (default 1)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridgeshift",
        description=(
            "Regularization-parameter selection for ridge classifiers under "
            "covariate shift."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_art = sub.add_parser(
        "artificial", help="run the artificial variance-shift experiment"
    )
    _add_common_flags(p_art)

    p_heart = sub.add_parser(
        "heart", help="run the cross-hospital heart-disease experiment"
    )
    _add_common_flags(p_heart)
    p_heart.add_argument(
        "--data-dir",
        required=True,
        help="directory holding the four processed UCI heart-disease files",
    )

    p_curves = sub.add_parser(
        "curves", help="emit population target-MSE curves per target variance"
    )
    _add_common_flags(p_curves)
    return parser


def _config_from_args(args: argparse.Namespace, **command_defaults) -> ExperimentConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "out_dir": args.out_dir,
        "repeats": args.repeats,
        "jobs": args.jobs,
    }
    if args.format is not None:
        overrides["formats"] = tuple(
            part.strip() for part in args.format.split(",") if part.strip()
        )
    if args.estimators is not None:
        overrides["estimators"] = tuple(
            part.strip() for part in args.estimators.split(",") if part.strip()
        )
    return build_config(file_values, overrides, **command_defaults)


def _emit_all(table, cfg: ExperimentConfig, stem: str, experiment: str) -> list[Path]:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    suffix = {"csv": ".csv", "markdown": ".md"}
    for fmt in cfg.formats:
        written.append(emit_table(table, fmt, out_dir / f"{stem}{suffix[fmt]}"))
    written.append(
        write_manifest(table, cfg, out_dir / f"{stem}_manifest.json", experiment)
    )
    return written


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "artificial":
            cfg = _config_from_args(args)
            table = run_artificial(cfg)
            written = _emit_all(table, cfg, "artificial_table", "artificial")
        elif args.command == "heart":
            cfg = _config_from_args(args, repeats=10)
            table = run_heart(cfg, args.data_dir)
            written = _emit_all(table, cfg, "heart_table", "heart")
        else:
            cfg = _config_from_args(args)
            problem = variance_shift_problem(
                cfg.class_means,
                cfg.source_variance,
                cfg.target_variances[0],
                cfg.class_priors,
            )
            out_dir = Path(cfg.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            written = [emit_mse_curves(problem, cfg, out_dir / "mse_curves.tsv")]
            written.append(
                write_manifest(None, cfg, out_dir / "curves_manifest.json", "curves")
            )
            table = None
    except (ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except RidgeshiftError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return 3

    for path in written:
        print(path)
    if table is not None and table.max_failure_fraction() > cfg.failure_budget:
        print(
            f"estimation failures exceeded the budget "
            f"({table.max_failure_fraction():.2f} > {cfg.failure_budget:.2f})",
            file=sys.stderr,
        )
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
