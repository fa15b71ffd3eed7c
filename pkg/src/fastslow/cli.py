"""Command line entry point: ``fastslow generate|run|report|plot``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness


def _sizes(text: str) -> list[int]:
    # "5..25:5" or "5,10,15"
    if ".." in text:
        rng, _, step = text.partition(":")
        lo, hi = (int(x) for x in rng.split(".."))
        return list(range(lo, hi + 1, int(step or 1)))
    return [int(x) for x in text.split(",")]


def _label(text: str | None) -> bool | None:
    return None if text is None else text == "solvable"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fastslow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a labeled graph-coloring dataset")
    g.add_argument("--sizes", type=_sizes, default=_sizes("5..25:5"), help="e.g. 5..25:5 or 5,10")
    g.add_argument("--count", type=int, default=100, help="instances per size")
    g.add_argument("--edge-prob", type=float, nargs=2, default=(0.1, 0.9), metavar=("LO", "HI"))
    g.add_argument("-k", type=int, default=4, help="color budget")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--oracle-budget", type=float, default=10.0, help="seconds per oracle call")
    g.add_argument("out", type=Path)

    r = sub.add_parser("run", help="run a sweep described by a YAML/JSON config")
    r.add_argument("config", type=Path)
    r.add_argument("--workers", type=int, default=None)

    rep = sub.add_parser("report", help="recompute the CSV report from transcripts")
    rep.add_argument("transcripts", type=Path, nargs="+")
    rep.add_argument("-o", "--out", type=Path, default=None)
    rep.add_argument("--only", choices=["solvable", "unsolvable"], default=None)
    rep.add_argument("--size", type=int, default=None)

    p = sub.add_parser("plot", help="scatter success rate against mean time")
    p.add_argument("csv", type=Path, nargs="+")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--title", default=None)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "generate":
        summary = harness.cmd_generate(
            args.sizes, args.count, tuple(args.edge_prob), args.k, args.seed, args.out, args.oracle_budget
        )
        summary.pop("items")
        print(json.dumps(summary, indent=2))
    elif args.command == "run":
        spec = harness.SweepSpec.load(args.config)
        if args.workers is not None:
            spec = replace(spec, workers=args.workers)
        rows = harness.cmd_run(spec)
        sys.stdout.write(harness.rows_to_csv(rows))
    elif args.command == "report":
        rows = harness.cmd_report(args.transcripts, args.out, _label(args.only), args.size)
        sys.stdout.write(harness.rows_to_csv(rows))
    elif args.command == "plot":
        print(harness.cmd_plot(args.csv, args.out, args.title))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
