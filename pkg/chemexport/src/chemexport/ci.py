"""Determinant CASCI with a precomputed sparse coupling structure.

The active-space Hamiltonian in the S_z = 0 determinant basis is linear in
the integrals, so the coupling pattern (which determinant pairs connect,
with which sign, through which integral element) is built once per
(n_active, n_alpha, n_beta) and re-evaluated for new integrals with two
scatter-adds. That makes the CASCI energy cheap enough to sit inside an
orbital-rotation optimizer.

Operator convention matches the exported bundle exactly:
H = sum_pq h_pq a+_p a_q + 1/2 sum_pqrs h_pqrs a+_p a+_q a_r a_s over spin
orbitals (alpha block first), with spatial h_pqrs = (ps|qr) in chemist
notation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np


def chemist_to_hamiltonian_order(eri_chem: np.ndarray) -> np.ndarray:
    """(ps|qr) -> h_pqrs so that a+_p a+_q a_r a_s reproduces the Coulomb term."""
    return np.ascontiguousarray(np.transpose(eri_chem, (0, 2, 3, 1)))


def _apply_annihilation(bits: int, p: int) -> tuple[int, int] | None:
    if not (bits >> p) & 1:
        return None
    sign = -1 if bin(bits & ((1 << p) - 1)).count("1") % 2 else 1
    return bits & ~(1 << p), sign


def _apply_creation(bits: int, p: int) -> tuple[int, int] | None:
    if (bits >> p) & 1:
        return None
    sign = -1 if bin(bits & ((1 << p) - 1)).count("1") % 2 else 1
    return bits | (1 << p), sign


def _apply_string(bits: int, ops: tuple[tuple[int, bool], ...]) -> tuple[int, int] | None:
    """Apply (index, creation?) pairs right to left with fermionic signs."""
    sign = 1
    for p, create in reversed(ops):
        out = _apply_creation(bits, p) if create else _apply_annihilation(bits, p)
        if out is None:
            return None
        bits, s = out
        sign *= s
    return bits, sign


@dataclass
class CIStructure:
    n_active: int
    n_alpha: int
    n_beta: int
    dets: list[int]                   # spin-orbital occupation bitstrings
    rows1: np.ndarray
    cols1: np.ndarray
    idx1: np.ndarray                  # flat indices into h1 (n_act^2)
    signs1: np.ndarray
    rows2: np.ndarray
    cols2: np.ndarray
    idx2: np.ndarray                  # flat indices into h_pqrs (n_act^4)
    signs2: np.ndarray

    @property
    def n_dets(self) -> int:
        return len(self.dets)

    def hamiltonian(self, h1: np.ndarray, h2: np.ndarray, e_core: float = 0.0) -> np.ndarray:
        nd = self.n_dets
        flat1 = self.rows1 * nd + self.cols1
        flat2 = self.rows2 * nd + self.cols2
        h = np.bincount(flat1, weights=self.signs1 * h1.ravel()[self.idx1],
                        minlength=nd * nd)
        h += np.bincount(flat2, weights=0.5 * self.signs2 * h2.ravel()[self.idx2],
                         minlength=nd * nd)
        h = h.reshape(nd, nd)
        h += e_core * np.eye(nd)
        return h

    def ground_energy(self, h1: np.ndarray, h2: np.ndarray, e_core: float = 0.0) -> float:
        return float(np.linalg.eigvalsh(self.hamiltonian(h1, h2, e_core))[0])


@lru_cache(maxsize=16)
def build_ci_structure(n_active: int, n_alpha: int, n_beta: int) -> CIStructure:
    """Enumerate the fixed-(N_a, N_b) determinant basis and its couplings."""
    orbs = range(n_active)
    alpha_strings = [sum(1 << o for o in occ) for occ in combinations(orbs, n_alpha)]
    beta_strings = [sum(1 << o for o in occ) for occ in combinations(orbs, n_beta)]
    dets = [(b << n_active) | a for a in alpha_strings for b in beta_strings]
    index = {d: i for i, d in enumerate(dets)}
    n_spin = 2 * n_active

    e1 = {"rows": [], "cols": [], "idx": [], "signs": []}
    e2 = {"rows": [], "cols": [], "idx": [], "signs": []}

    def spin_orbit(p_spatial: int, spin: int) -> int:
        return p_spatial + spin * n_active

    for col, det in enumerate(dets):
        for p in range(n_active):
            for q in range(n_active):
                for spin in (0, 1):
                    out = _apply_string(det, ((spin_orbit(p, spin), True),
                                              (spin_orbit(q, spin), False)))
                    if out is None:
                        continue
                    new, sign = out
                    row = index.get(new)
                    if row is None:
                        continue
                    e1["rows"].append(row)
                    e1["cols"].append(col)
                    e1["idx"].append(p * n_active + q)
                    e1["signs"].append(sign)
        n2 = n_active
        for p in range(n2):
            for q in range(n2):
                for r in range(n2):
                    for s in range(n2):
                        for sa in (0, 1):
                            for sb in (0, 1):
                                out = _apply_string(det, (
                                    (spin_orbit(p, sa), True),
                                    (spin_orbit(q, sb), True),
                                    (spin_orbit(r, sb), False),
                                    (spin_orbit(s, sa), False),
                                ))
                                if out is None:
                                    continue
                                new, sign = out
                                row = index.get(new)
                                if row is None:
                                    continue
                                e2["rows"].append(row)
                                e2["cols"].append(col)
                                e2["idx"].append(((p * n2 + q) * n2 + r) * n2 + s)
                                e2["signs"].append(sign)

    return CIStructure(
        n_active=n_active, n_alpha=n_alpha, n_beta=n_beta, dets=dets,
        rows1=np.asarray(e1["rows"]), cols1=np.asarray(e1["cols"]),
        idx1=np.asarray(e1["idx"]), signs1=np.asarray(e1["signs"], dtype=float),
        rows2=np.asarray(e2["rows"]), cols2=np.asarray(e2["cols"]),
        idx2=np.asarray(e2["idx"]), signs2=np.asarray(e2["signs"], dtype=float),
    )


@dataclass
class ActiveSpace:
    """Partition of the MO space and the derived active-space quantities."""

    core: list[int]
    active: list[int]
    n_act_alpha: int
    n_act_beta: int

    @property
    def n_active(self) -> int:
        return len(self.active)


def active_space_integrals(h_mo: np.ndarray, eri_mo: np.ndarray, e_nuc: float,
                           space: ActiveSpace) -> tuple[float, np.ndarray, np.ndarray]:
    """Frozen-core reduction: (e_core, effective h1, chemist eri) on actives."""
    core, act = space.core, space.active
    e_core = e_nuc
    if core:
        e_core += 2.0 * sum(h_mo[c, c] for c in core)
        for c in core:
            for cp in core:
                e_core += 2.0 * eri_mo[c, c, cp, cp] - eri_mo[c, cp, cp, c]
    # explicit loops keep the index juggling honest
    h_eff = h_mo[np.ix_(act, act)].copy()
    for i, p in enumerate(act):
        for j, q in enumerate(act):
            for c in core:
                h_eff[i, j] += 2.0 * eri_mo[p, q, c, c] - eri_mo[p, c, c, q]
    eri_act = eri_mo[np.ix_(act, act, act, act)]
    return float(e_core), h_eff, eri_act


def casci_ground_energy(h_mo, eri_mo, e_nuc, space: ActiveSpace) -> float:
    e_core, h_eff, eri_act = active_space_integrals(h_mo, eri_mo, e_nuc, space)
    structure = build_ci_structure(space.n_active, space.n_act_alpha, space.n_act_beta)
    h2 = chemist_to_hamiltonian_order(eri_act)
    return structure.ground_energy(h_eff, h2, e_core)
