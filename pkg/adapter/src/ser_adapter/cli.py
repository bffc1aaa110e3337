"""Command-line entry point.

Exit codes: 0 all files scored, 1 usage error, 2 manifest or model
failure, 3 finished but some files were skipped as undecodable.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .adapter import load_manifest, score_audio, write_scores
from .errors import AdapterError
from .models import DEFAULT_MODEL_REF


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"usage error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ser-adapter")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("score-audio", help="score a manifest of WAV files")
    p.add_argument("--manifest", required=True, help="TSV of id<TAB>path lines")
    p.add_argument("--out", required=True, help="output score CSV path")
    p.add_argument("--model-ref", default=DEFAULT_MODEL_REF)
    p.add_argument("--batch-size", type=int, default=8)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code or 1
    try:
        manifest = load_manifest(args.manifest)
        run = score_audio(manifest, model_ref=args.model_ref, batch_size=args.batch_size)
        write_scores(run, args.out)
    except (AdapterError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"scored {len(run.rows)} of {len(manifest)} file(s) -> {args.out}")
    if run.skipped:
        for uid, reason in run.skipped:
            print(f"skipped {uid}: {reason}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
