"""Command-line entry point: ``jmdsim simulate`` and ``jmdsim selftest``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import selftest
from .errors import JmdError
from .harness import SweepSpec, dump_results, run_sweep, write_results

log = logging.getLogger("jmdsim")


def _simulate(args) -> int:
    spec = SweepSpec.from_file(args.config)
    if args.seed is not None:
        spec.base = spec.base.replace(seed=args.seed)
    if args.no_timing:
        spec.record_timing = False
    fmt = args.format or spec.format
    out = args.out or spec.output_path
    spec = replace(spec, format=fmt, output_path=out)
    records = run_sweep(spec, workers=args.workers)
    if out and out != "-":
        write_results(records, fmt, out)
        log.info("wrote %d records to %s", len(records), out)
    else:
        dump_results(records, fmt, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jmdsim",
        description="Monte-Carlo simulator for joint jammer mitigation and data detection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a sweep described by a config file")
    sim.add_argument("--config", required=True, help="YAML or JSON sweep config")
    sim.add_argument("--out", help="output path ('-' for stdout); overrides the config")
    sim.add_argument("--format", choices=("csv", "jsonl"), help="output format")
    sim.add_argument("--workers", type=int, default=1, help="worker processes")
    sim.add_argument("--seed", type=int, help="master seed; overrides the config")
    sim.add_argument("--no-timing", action="store_true",
                     help="write wall_time_s = 0 so outputs are byte-reproducible")

    st = sub.add_parser("selftest", help="run the built-in oracle checks")
    st.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            if args.workers < 1:
                raise JmdError("--workers must be >= 1")
            return _simulate(args)
        return 0 if selftest.run(args.seed) else 1
    except (JmdError, OSError) as exc:
        print(f"jmdsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
