"""CLI: jmie-export export --corpus DIR --model ID --out FILE."""

from __future__ import annotations

import argparse
import sys

from .align import TokenizerAlignmentFailure
from .export import POOLINGS, ModelLoadError, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jmie-export")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="write a JEMB1 embedding file for a corpus")
    p.add_argument("--corpus", required=True, help="corpus directory (txt/ layout or flat)")
    p.add_argument("--model", required=True, help="transformers checkpoint id or local path")
    p.add_argument("--out", required=True, help="output JEMB1 path")
    p.add_argument("--pooling", choices=POOLINGS, default="last")
    p.add_argument("--layer", type=int, default=-1, help="hidden-state layer index")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        written = export(args.corpus, args.model, args.out,
                         pooling=args.pooling, layer=args.layer)
    except (ModelLoadError, TokenizerAlignmentFailure, FileNotFoundError) as exc:
        print(f"jmie-export: {exc}", file=sys.stderr)
        return 2
    total = sum(written.values())
    print(f"wrote {total} sentences over {len(written)} documents to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
