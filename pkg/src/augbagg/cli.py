"""Command-line entry point: ``augbagg run|plot|validate-config|version``.

Exit codes: 0 success, 2 configuration or argument error, 3 data error
(missing or malformed input file), 4 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .errors import ConfigError, FormatError, PolicyError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("augbagg")


def _cmd_run(args) -> int:
    from .experiments import run_experiment

    cfg = load_config(args.config, full=args.full)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("workers", "must be a positive integer")
        cfg = replace(cfg, workers=args.workers)
    manifest = run_experiment(cfg)
    check = manifest.get("rerun_check")
    if check and check["mismatched"]:
        log.warning("outputs differ from the previous run of this config: %s", ", ".join(check["mismatched"]))
    print(f"wrote {len(manifest['files'])} files to {cfg.output_dir}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config, full=args.full)
    print(f"ok: {cfg.experiment} (seed={cfg.seed}, output_dir={cfg.output_dir})")
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .plotting import plot_csv

    where = {}
    for item in args.where or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError("--where", f"expected COLUMN=VALUE, got {item!r}")
        where[key] = value
    out = Path(args.out) if args.out else Path(args.results_csv).with_suffix(".svg")
    try:
        path = plot_csv(args.results_csv, out, args.x, args.y, args.series, args.err, where,
                        args.logx, args.title)
    except ValueError as exc:
        raise ConfigError("plot", str(exc)) from None
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_version(args) -> int:
    print(f"augbagg {__version__}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="augbagg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--full", action="store_true", help="use full-scale defaults")
    run.add_argument("--workers", type=int, help="override the config's worker count")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate-config", help="parse and validate a config without running it")
    val.add_argument("config")
    val.add_argument("--full", action="store_true")
    val.set_defaults(func=_cmd_validate)

    plot = sub.add_parser("plot", help="line chart from a results CSV")
    plot.add_argument("results_csv")
    plot.add_argument("--x", required=True)
    plot.add_argument("--y", required=True)
    plot.add_argument("--series", nargs="*", default=[], help="columns that split rows into lines")
    plot.add_argument("--err", help="column holding the +-1 sd error bar")
    plot.add_argument("--where", nargs="*", help="COLUMN=VALUE row filters")
    plot.add_argument("--logx", action="store_true")
    plot.add_argument("--title", default="")
    plot.add_argument("--out", help="output SVG (default: next to the CSV)")
    plot.set_defaults(func=_cmd_plot)

    ver = sub.add_parser("version", help="print the package version")
    ver.set_defaults(func=_cmd_version)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, PolicyError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
