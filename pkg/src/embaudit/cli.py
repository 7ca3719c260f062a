"""Command-line entry point.

Exit status: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .association import AssociationError
from .embedding_io import ParseError
from .embedding_space import EmptyIntersectionError, ZeroVarianceError
from .mixed_effects import MixedModelError
from .pipeline import (ConfigError, DataError, audit_assoc, audit_sentiment, expand_targets,
                       load_config, validate)
from .sentiment import TrainingError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("embaudit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override every seed in the config")
    common.add_argument("--out", metavar="DIR", help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="embaudit", description="Cross-corpus word-embedding association and sentiment audits.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("expand-targets", parents=[common],
                       help="nearest-neighbor candidate lists for a representative word")
    p.add_argument("--word", required=True, help="representative (seed) word")
    p.add_argument("-k", type=int, default=50, help="neighbors per space (default: 50)")

    sub.add_parser("audit-assoc", parents=[common],
                   help="cross-corpus association test, one CSV per embedding pair")
    sub.add_parser("audit-sentiment", parents=[common],
                   help="classifier accuracy and mixed-effects comparison CSVs")
    sub.add_parser("validate", parents=[common], help="check that every configured input loads")
    return parser


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, seed=args.seed, out=args.out)
    if args.command == "expand-targets":
        for path in expand_targets(cfg, args.word, args.k):
            print(path)
    elif args.command == "audit-assoc":
        audit_assoc(cfg)
        print(cfg.out)
    elif args.command == "audit-sentiment":
        audit_sentiment(cfg)
        print(cfg.out)
    elif args.command == "validate":
        for line in validate(cfg):
            print(line)
        print("ok")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ZeroVarianceError, MixedModelError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, DataError, AssociationError, EmptyIntersectionError, TrainingError,
            KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"data error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
