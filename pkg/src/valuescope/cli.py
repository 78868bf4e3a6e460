"""Command line: ``valuescope <stage> [--config FILE] [options]``.

Exit codes: 0 success, 1 other fatal error, 2 usage error, 3 invalid
configuration, 4 missing upstream artifact.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from collections.abc import Sequence

from . import __version__
from .config import RunConfig
from .dimensions import dimension_names
from .exceptions import AuthenticationError, ConfigError, MissingArtifactError, ValueScopeError
from .pipeline import STAGES, Pipeline, Selection
from .preference import InputVariant

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4

HELP = {
    "ingest": "parse dump files, apply exclusion rules, tag partitions",
    "sample": "Likert-rate comments, stratify, and draw pairs for labeling",
    "label": "judge the sampled pairs",
    "simulate": "generate five rewrites per seed comment",
    "filter": "run the lexical, fluency and content filters on rewrites",
    "winrate": "judge random matchings and compute normness scales",
    "score-preference": "score originals and rewrites and compute deltas",
    "rpm": "bin deltas into return-potential curves",
    "dynamics": "intensity, crystallization, temporal-change regressions, user shifts",
    "synthbench": "run the planted-truth recovery benchmark",
    "report": "verify the run directory and join stage outputs",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--run-dir", help="output directory (overrides run_dir in the config)")
    common.add_argument("--community", action="append", default=[], help="restrict to a community (repeatable)")
    common.add_argument("--dimension", action="append", default=[], choices=dimension_names(), help="restrict to a dimension (repeatable)")
    common.add_argument("--seed", type=int, help="root random seed")
    common.add_argument("--bins", type=int, help="number of return-potential bins")
    common.add_argument("--s1", help="first period for temporal change, e.g. 2019-2020")
    common.add_argument("--s2", help="second period for temporal change, e.g. 2021-2023")
    common.add_argument("--variant", choices=[v.value for v in InputVariant], help="preference input variant")
    common.add_argument("--offline", action="store_true", help="use the deterministic stub backends")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="valuescope", description="Quantify community norms from comment corpora.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="stage", metavar="stage", required=True)
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=HELP[stage], description=HELP[stage])
    return parser


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.synthbench = dataclasses.replace(cfg.synthbench, seed=args.seed)
    if args.bins is not None:
        cfg.rpm.bins = args.bins
    if args.s1:
        cfg.dynamics.s1 = args.s1
    if args.s2:
        cfg.dynamics.s2 = args.s2
    if args.variant:
        cfg.preference.variant = args.variant
    if args.offline:
        cfg.backends.offline = True
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(RunConfig.load(args.config), args)
        pipeline = Pipeline(cfg, run_dir=args.run_dir)
        notes = pipeline.run(args.stage, Selection(args.community, args.dimension))
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"error: missing upstream artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except AuthenticationError as exc:
        print(f"error: authentication failed: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except ValueScopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    if args.stage == "synthbench":
        print(notes["summary"])
    else:
        print(f"{args.stage}: ok ({pipeline.ws.root})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
