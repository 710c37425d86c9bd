"""Command-line entry point: run, sweep and report subcommands."""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiment
from .config import parse_config_text


def _read_config(path):
    with open(path) as f:
        text = f.read()
    return parse_config_text(text), text


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qosdiff",
        description="QoS matrix completion experiments",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run all configured experiment cells")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--force", action="store_true",
                       help="recompute cells already in the manifest")

    p_sweep = sub.add_parser("sweep", help="hyperparameter sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", required=True,
                         choices=experiment.SWEEP_AXES)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    p_sweep.add_argument("--force", action="store_true")

    p_report = sub.add_parser("report", help="consolidate finished runs")
    p_report.add_argument("--dir", required=True)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "run":
        cfg, text = _read_config(args.config)
        ok, _ = experiment.run(cfg, config_text=text, force=args.force)
        return 0 if ok else 1
    if args.command == "sweep":
        cfg, text = _read_config(args.config)
        values = [float(v) for v in args.values.split(",") if v.strip()]
        ok = experiment.sweep(cfg, args.axis, values, config_text=text,
                              force=args.force)
        return 0 if ok else 1
    if args.command == "report":
        sys.stdout.write(experiment.consolidate(args.dir))
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
