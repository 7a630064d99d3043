"""Active-space integral bundles: in-memory container, JSON I/O, validation.

A bundle file is one JSON document per molecule:

    {"format": "active-space-bundle-v1", "molecule": "...", "meta": {...},
     "records": [{"r": float, "n_orb": int, "n_elec": int, "e_core": float,
                  "h1": [...row-major...], "h2": [...flat p*n^3+q*n^2+r*n+s...],
                  "dipole1": [[...],[...],[...]], "nuclear_dipole": [x,y,z],
                  "reference_energy": float|absent}, ...]}

All floats are 64-bit and serialized at full precision. h2 is stored in the
ordering that makes H = sum h_pq a+_p a_q + 1/2 sum h_pqrs a+_p a+_q a_r a_s
a literal transcription (generators convert from chemist ordering).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BUNDLE_FORMAT = "active-space-bundle-v1"


@dataclass(frozen=True)
class ActiveSpaceIntegrals:
    """One geometry's active-space integrals (Hartree / e*a0 / Angstrom)."""

    n_orb: int
    n_elec: int
    e_core: float
    h1: np.ndarray
    h2: np.ndarray
    dipole1: np.ndarray
    nuclear_dipole: np.ndarray
    r: float
    reference_energy: float | None = None

    def check(self, tol: float = 1e-8) -> None:
        """Raise ValueError naming the first violated structural invariant."""
        for name, violation in self.violations(tol):
            raise ValueError(f"{name}: {violation}")

    def violations(self, tol: float = 1e-8) -> list[tuple[str, str]]:
        """All violated invariants as (field, description) pairs; empty if valid."""
        n = self.n_orb
        out = []
        if self.h1.shape != (n, n):
            out.append(("h1", f"shape {self.h1.shape} != ({n}, {n})"))
        if self.h2.shape != (n, n, n, n):
            out.append(("h2", f"shape {self.h2.shape} != ({n},)*4"))
        if self.dipole1.shape != (3, n, n):
            out.append(("dipole1", f"shape {self.dipole1.shape} != (3, {n}, {n})"))
        if self.nuclear_dipole.shape != (3,):
            out.append(("nuclear_dipole", f"shape {self.nuclear_dipole.shape} != (3,)"))
        for name, arr in (("h1", self.h1), ("h2", self.h2), ("dipole1", self.dipole1),
                          ("nuclear_dipole", self.nuclear_dipole)):
            if not np.all(np.isfinite(arr)):
                out.append((name, "contains non-finite entries"))
        if out:
            return out
        if np.max(np.abs(self.h1 - self.h1.T)) > tol:
            out.append(("h1", "not symmetric"))
        # Hermiticity of the two-body operator: h_pqrs = h_srqp.
        if np.max(np.abs(self.h2 - np.transpose(self.h2, (3, 2, 1, 0)))) > tol:
            out.append(("h2", "violates Hermiticity (h_pqrs != h_srqp)"))
        for c in range(3):
            if np.max(np.abs(self.dipole1[c] - self.dipole1[c].T)) > tol:
                out.append(("dipole1", f"component {c} not symmetric"))
        if not (0 <= self.n_elec <= 2 * n):
            out.append(("n_elec", f"{self.n_elec} outside 0..{2 * n}"))
        return out

    def to_record(self) -> dict:
        rec = {
            "r": float(self.r),
            "n_orb": int(self.n_orb),
            "n_elec": int(self.n_elec),
            "e_core": float(self.e_core),
            "h1": [float(v) for v in self.h1.ravel()],
            "h2": [float(v) for v in self.h2.ravel()],
            "dipole1": [[float(v) for v in self.dipole1[c].ravel()] for c in range(3)],
            "nuclear_dipole": [float(v) for v in self.nuclear_dipole],
        }
        if self.reference_energy is not None:
            rec["reference_energy"] = float(self.reference_energy)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ActiveSpaceIntegrals":
        n = int(rec["n_orb"])
        return cls(
            n_orb=n,
            n_elec=int(rec["n_elec"]),
            e_core=float(rec["e_core"]),
            h1=np.asarray(rec["h1"], dtype=float).reshape(n, n),
            h2=np.asarray(rec["h2"], dtype=float).reshape(n, n, n, n),
            dipole1=np.asarray(
                [np.asarray(rec["dipole1"][c], dtype=float).reshape(n, n) for c in range(3)]
            ),
            nuclear_dipole=np.asarray(rec["nuclear_dipole"], dtype=float),
            r=float(rec["r"]),
            reference_energy=(float(rec["reference_energy"])
                              if "reference_energy" in rec else None),
        )


@dataclass
class Bundle:
    """All geometry records of one molecule scan."""

    molecule: str
    records: list[ActiveSpaceIntegrals]
    meta: dict = field(default_factory=dict)

    @property
    def n_orb(self) -> int:
        return self.records[0].n_orb

    @property
    def grid(self) -> np.ndarray:
        return np.asarray([rec.r for rec in self.records])

    def save(self, path: str | Path) -> None:
        doc = {
            "format": BUNDLE_FORMAT,
            "molecule": self.molecule,
            "meta": self.meta,
            "records": [rec.to_record() for rec in self.records],
        }
        Path(path).write_text(json.dumps(doc, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "Bundle":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"{path}: not a {BUNDLE_FORMAT} document")
        return cls(
            molecule=doc.get("molecule", "?"),
            records=[ActiveSpaceIntegrals.from_record(rec) for rec in doc["records"]],
            meta=doc.get("meta", {}),
        )


def validate_bundle(path: str | Path, tol: float = 1e-8) -> list[str]:
    """Schema and invariant check; returns a list of human-readable violations."""
    problems: list[str] = []
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return [f"unreadable bundle: {exc}"]
    if doc.get("format") != BUNDLE_FORMAT:
        problems.append(f"format field is {doc.get('format')!r}, expected {BUNDLE_FORMAT!r}")
    records = doc.get("records")
    if not isinstance(records, list) or not records:
        problems.append("records: missing or empty")
        return problems
    required = {"r", "n_orb", "n_elec", "e_core", "h1", "h2", "dipole1", "nuclear_dipole"}
    grid = []
    for i, rec in enumerate(records):
        missing = required - set(rec)
        if missing:
            problems.append(f"record {i}: missing fields {sorted(missing)}")
            continue
        try:
            ints = ActiveSpaceIntegrals.from_record(rec)
        except (ValueError, TypeError) as exc:
            problems.append(f"record {i}: malformed ({exc})")
            continue
        for name, what in ints.violations(tol):
            problems.append(f"record {i}: {name} {what}")
        grid.append(ints.r)
    if len(grid) > 1 and not all(b > a for a, b in zip(grid, grid[1:])):
        problems.append("grid: R values are not strictly increasing")
    n_orbs = {rec.get("n_orb") for rec in records if "n_orb" in rec}
    if len(n_orbs) > 1:
        problems.append(f"records disagree on n_orb: {sorted(n_orbs)}")
    return problems
