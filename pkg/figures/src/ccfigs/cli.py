"""Command-line entry point.

``ccfigs render --manifest figures.json --outdir <dir>`` renders every
figure in the manifest. Exit codes: 0 everything written (an empty
manifest is a warned no-op), 1 at least one figure failed, 2 unusable
manifest.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ManifestError
from .render import render_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccfigs",
        description="render fairness-experiment CSVs into figures",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)
    sp = sub.add_parser("render", help="render every figure in a JSON manifest")
    sp.add_argument("--manifest", required=True,
                    help='JSON file with a "figures" array of figure specs')
    sp.add_argument("--outdir", required=True,
                    help="directory the images are written into")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = render_all(args.manifest, args.outdir)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in summary.written:
        print(f"wrote {path}")
    for label, message in summary.failures:
        print(f"error: {label}: {message}", file=sys.stderr)
    if summary.failures:
        total = len(summary.written) + len(summary.failures)
        print(f"{len(summary.failures)} of {total} figures failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
