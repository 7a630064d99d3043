"""State-specific CASSCF by direct minimization over orbital rotations.

The CASCI ground energy is minimized over exp(K) orbital rotations with K
antisymmetric on the non-redundant blocks (core-active, core-virtual,
active-virtual); active-active and intra-core rotations leave the CASCI
energy invariant and are excluded. Gradients are quasi-Newton finite
differences — the problems here are small enough (tens of parameters, CI
spaces of a few hundred determinants) that this is both simple and robust.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .ci import ActiveSpace, active_space_integrals, build_ci_structure, chemist_to_hamiltonian_order
from .scf import AOIntegrals


def expm_antisymmetric(k: np.ndarray) -> np.ndarray:
    """exp(K) for small antisymmetric K by scaling-and-squaring Taylor."""
    n_sq = max(0, int(np.ceil(np.log2(max(np.max(np.abs(k)) * k.shape[0], 1e-30)))) + 1)
    a = k / (1 << n_sq)
    out = np.eye(k.shape[0])
    term = np.eye(k.shape[0])
    for i in range(1, 24):
        term = term @ a / i
        out = out + term
        if np.max(np.abs(term)) < 1e-17:
            break
    for _ in range(n_sq):
        out = out @ out
    return out


def transform_mo(ao: AOIntegrals, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h_mo = c.T @ ao.hcore @ c
    # Sequential quarter transforms; avoids einsum path search on a hot path.
    eri_mo = np.tensordot(ao.eri, c, axes=([3], [0]))      # pqr l
    eri_mo = np.tensordot(eri_mo, c, axes=([2], [0]))      # pq lk -> pqlk? keep order
    eri_mo = np.tensordot(eri_mo, c, axes=([1], [0]))
    eri_mo = np.tensordot(eri_mo, c, axes=([0], [0]))
    # tensordot appended the new axes in reverse order: result[l,k,j,i] -> transpose.
    return h_mo, eri_mo.transpose(3, 2, 1, 0)


def _rotation_pairs(space: ActiveSpace, n_orb: int,
                    orbital_labels: np.ndarray | None = None) -> list[tuple[int, int]]:
    virtual = [p for p in range(n_orb) if p not in space.core and p not in space.active]
    pairs = []
    pairs += [(c, a) for c in space.core for a in space.active]
    pairs += [(c, v) for c in space.core for v in virtual]
    pairs += [(a, v) for a in space.active for v in virtual]
    if orbital_labels is not None:
        pairs = [(i, j) for i, j in pairs if orbital_labels[i] == orbital_labels[j]]
    return pairs


@dataclass
class CASSCFResult:
    energy: float
    mo_coeff: np.ndarray
    e_core: float
    h1_active: np.ndarray
    eri_active_chemist: np.ndarray
    n_evaluations: int
    converged: bool


def run_casscf(ao: AOIntegrals, mo_guess: np.ndarray, space: ActiveSpace,
               gtol: float = 3e-5, max_iter: int = 150, fd_step: float = 1e-5,
               orbital_labels: np.ndarray | None = None) -> CASSCFResult:
    """Minimize the CASCI ground energy over non-redundant orbital rotations.

    Gradients are two-point finite differences; gtol sits above their noise
    floor (~1e-6 with the default step), which still pins the energy to well
    under a microhartree of the stationary point for these problem sizes.
    Orbital labels (symmetry irreps) restrict rotations to same-label pairs.
    """
    n_orb = ao.n
    pairs = _rotation_pairs(space, n_orb, orbital_labels)
    structure = build_ci_structure(space.n_active, space.n_act_alpha, space.n_act_beta)
    evals = 0
    # Only the core+active columns enter the energy; transform just those.
    occupied_cols = sorted(space.core + space.active)
    local_space = ActiveSpace(
        core=[occupied_cols.index(c) for c in space.core],
        active=[occupied_cols.index(a) for a in space.active],
        n_act_alpha=space.n_act_alpha, n_act_beta=space.n_act_beta,
    )

    def orbitals(k_params: np.ndarray) -> np.ndarray:
        k = np.zeros((n_orb, n_orb))
        for (i, j), v in zip(pairs, k_params):
            k[i, j] = v
            k[j, i] = -v
        return mo_guess @ expm_antisymmetric(k)

    def energy(k_params: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        c = orbitals(k_params)[:, occupied_cols]
        h_mo, eri_mo = transform_mo(ao, c)
        e_core, h_eff, eri_act = active_space_integrals(h_mo, eri_mo, ao.e_nuc, local_space)
        return structure.ground_energy(h_eff, chemist_to_hamiltonian_order(eri_act), e_core)

    if pairs:
        res = minimize(energy, np.zeros(len(pairs)), method="BFGS",
                       options={"gtol": gtol, "maxiter": max_iter, "eps": fd_step})
        k_opt = res.x
        converged = bool(res.success) or float(np.max(np.abs(res.jac))) < 20 * gtol
    else:
        k_opt = np.zeros(0)
        converged = True

    c_opt = orbitals(k_opt)
    h_mo, eri_mo = transform_mo(ao, c_opt)
    e_core, h_eff, eri_act = active_space_integrals(h_mo, eri_mo, ao.e_nuc, space)
    e_final = structure.ground_energy(h_eff, chemist_to_hamiltonian_order(eri_act), e_core)
    return CASSCFResult(energy=e_final, mo_coeff=c_opt, e_core=e_core, h1_active=h_eff,
                        eri_active_chemist=eri_act, n_evaluations=evals,
                        converged=converged)
