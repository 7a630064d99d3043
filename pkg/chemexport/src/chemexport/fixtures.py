"""Regenerate the committed fixture bundles used by the consumer's test suite.

One full-grid bundle per molecule plus the two reduced-range H4 bundles
(80 and 65 points) that sidestep its avoided crossing. A manifest records
grids, engine version, and content hashes so regeneration drift is visible.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .export import ScanSpec, export_scan

FIXTURES = {
    "h2.json": dict(molecule="H2"),
    "lih.json": dict(molecule="LiH"),
    "h4.json": dict(molecule="H4"),
    "h4_r080.json": dict(molecule="H4", m=80, r_min=0.8, r_max=2.0),
    "h4_r065.json": dict(molecule="H4", m=65, r_min=1.0, r_max=2.0),
}


def regenerate_fixtures(out_dir: str | Path, only: list[str] | None = None,
                        progress=None) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"engine": "chemexport", "bundles": {}}
    for name, kwargs in FIXTURES.items():
        if only and name not in only:
            continue
        spec = ScanSpec.paper(**kwargs)
        if progress:
            progress(-1, 0, f"=== {name}: {kwargs} ({spec.grid.size} points)")
        meta = export_scan(spec, out_dir / name, progress=progress)
        digest = hashlib.sha256((out_dir / name).read_bytes()).hexdigest()[:16]
        manifest["bundles"][name] = {**meta, "sha256_16": digest}
    path = out_dir / "manifest.json"
    existing = json.loads(path.read_text()) if path.exists() else {"bundles": {}}
    existing["engine"] = manifest["engine"]
    existing["bundles"].update(manifest["bundles"])
    path.write_text(json.dumps(existing, indent=1))
    return manifest
