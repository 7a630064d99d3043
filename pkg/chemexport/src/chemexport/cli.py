"""chemexport command line: single-scan export and fixture regeneration."""

from __future__ import annotations

import argparse
import sys

from .export import ScanSpec, export_scan
from .fixtures import FIXTURES, regenerate_fixtures


def _progress(i, total, msg):
    print(msg if total == 0 else f"[{i + 1}/{total}] {msg}", flush=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="chemexport",
                                     description="CASSCF/6-31G integral bundle exporter")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="export one dissociation scan")
    p.add_argument("--molecule", choices=["H2", "LiH", "H4"], required=True)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--r-min", type=float, default=None)
    p.add_argument("--r-max", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("fixtures", help="regenerate the committed fixture bundles")
    p.add_argument("--out", required=True)
    p.add_argument("--only", nargs="*", default=None,
                   help=f"subset of {sorted(FIXTURES)}")
    p.add_argument("--quiet", action="store_true")

    args = parser.parse_args(argv)
    progress = None if args.quiet else _progress
    if args.command == "export":
        spec = ScanSpec.paper(args.molecule, m=args.points, r_min=args.r_min,
                              r_max=args.r_max)
        meta = export_scan(spec, args.out, progress=progress)
        print(f"wrote {args.out}: {meta['n_points']} records, "
              f"anchor R={meta['anchor_r']:.4f}")
        if meta["skipped"]:
            print(f"warning: {len(meta['skipped'])} geometries skipped", file=sys.stderr)
            return 2
        return 0
    manifest = regenerate_fixtures(args.out, only=args.only, progress=progress)
    for name, meta in manifest["bundles"].items():
        print(f"{name}: {meta['n_points']} records sha={meta['sha256_16']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
