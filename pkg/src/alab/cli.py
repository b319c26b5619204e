"""Command line entry point: ``alab <experiment> --config FILE [--seed N] [--out DIR] [--epsilon RE,IM]``.

Exit status: 0 when every verdict holds, 2 when some verdict is false, 1 on error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

from .config import EXPERIMENTS, from_tree
from .errors import AlabError, ConfigError

EXIT_OK, EXIT_ERROR, EXIT_FALSE = 0, 1, 2


def _epsilon(text: str) -> list[float]:
    try:
        re_, im = (float(p) for p in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected RE,IM, got {text!r}") from exc
    return [re_, im]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alab", description="Numerical experiments on attracting sets of small topological degree.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    p.add_argument("--epsilon", type=_epsilon, metavar="RE,IM", help="override epsilon")
    p.add_argument("--allow-zero-epsilon", action="store_true", help="run an epsilon = 0 control instead of rejecting it")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load(args) -> "RunConfig":  # noqa: F821
    try:
        tree = json.loads(args.config.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{args.config}: malformed JSON: {exc}"]) from exc
    if not isinstance(tree, dict):
        raise ConfigError([f"{args.config}: top level must be an object"])
    tree["experiment"] = args.experiment
    if args.seed is not None:
        tree["seed"] = args.seed
    if args.epsilon is not None:
        tree["epsilon"] = args.epsilon
    if args.out is not None:
        tree["output_dir"] = str(args.out)
    if args.allow_zero_epsilon:
        tree["allow_zero_epsilon"] = True
    return from_tree(tree)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load(args)
    except OSError as exc:
        print(f"alab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ConfigError as exc:
        print("alab: invalid configuration", file=sys.stderr)
        for msg in exc.errors:
            print(f"  - {msg}", file=sys.stderr)
        return EXIT_ERROR

    from .experiments import run_experiment

    out = Path(cfg.output_dir)
    try:
        report = run_experiment(cfg, out)
    except AlabError as exc:
        print(f"alab: {cfg.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # surfaced with context, never swallowed
        traceback.print_exc()
        print(f"alab: {cfg.experiment} crashed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, ok in sorted(report.verdicts.items()):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"report: {out / 'report.json'}")
    return EXIT_OK if report.passed else EXIT_FALSE


if __name__ == "__main__":
    sys.exit(main())
