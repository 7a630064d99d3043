"""Restricted Hartree-Fock with DIIS over the precomputed AO integrals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisFunction, Molecule, build_basis
from .integrals import dipole_matrices, eri_tensor, kinetic_matrix, nuclear_matrix, overlap_matrix


class SCFConvergenceError(RuntimeError):
    pass


@dataclass
class AOIntegrals:
    """All AO-basis integrals of one geometry."""

    mol: Molecule
    basis: list[BasisFunction]
    s: np.ndarray
    hcore: np.ndarray
    eri: np.ndarray              # chemist (ij|kl)
    dipole: np.ndarray           # (3, n, n), electron position operator
    e_nuc: float

    @property
    def n(self) -> int:
        return self.s.shape[0]


def compute_ao_integrals(mol: Molecule) -> AOIntegrals:
    basis = build_basis(mol)
    s = overlap_matrix(basis)
    hcore = kinetic_matrix(basis) + nuclear_matrix(basis, mol)
    return AOIntegrals(mol=mol, basis=basis, s=s, hcore=hcore,
                       eri=eri_tensor(basis), dipole=dipole_matrices(basis),
                       e_nuc=mol.nuclear_repulsion())


def fock_matrix(ao: AOIntegrals, density: np.ndarray) -> np.ndarray:
    j = np.einsum("pqrs,rs->pq", ao.eri, density)
    k = np.einsum("prqs,rs->pq", ao.eri, density)
    return ao.hcore + j - 0.5 * k


@dataclass
class SCFResult:
    energy: float
    mo_coeff: np.ndarray         # columns, ascending orbital energy
    mo_energy: np.ndarray
    density: np.ndarray
    n_iter: int
    converged: bool


def reflection_labels(basis: list[BasisFunction]) -> np.ndarray:
    """Irrep label per function from px/py parity (molecule on the z axis).

    For linear molecules this separates sigma from pi_x from pi_y, so
    degenerate pi pairs never mix numerically and symmetry-forbidden
    integrals vanish identically.
    """
    return np.asarray([(f.powers[0] % 2) + 2 * (f.powers[1] % 2) for f in basis])


def rhf(ao: AOIntegrals, density_guess: np.ndarray | None = None,
        max_iter: int = 200, e_tol: float = 1e-10, d_tol: float = 1e-8,
        diis_size: int = 8, level_shift: float = 0.0,
        symmetry_labels: np.ndarray | None = None) -> SCFResult:
    """Closed-shell SCF; DIIS on the orthogonalized Fock residual.

    With symmetry_labels, the Fock matrix is diagonalized per label block and
    the resulting orbitals are exactly label-pure.
    """
    n_occ = ao.mol.n_electrons // 2
    if 2 * n_occ != ao.mol.n_electrons:
        raise ValueError("restricted HF needs an even electron count")
    s_val, s_vec = np.linalg.eigh(ao.s)
    x = s_vec @ np.diag(s_val**-0.5) @ s_vec.T

    if symmetry_labels is None:
        def solve(f):
            fp = x.T @ f @ x
            e, cp = np.linalg.eigh(fp)
            c = x @ cp
            return e, c
    else:
        blocks = [np.flatnonzero(symmetry_labels == lab)
                  for lab in sorted(set(symmetry_labels.tolist()))]

        def solve(f):
            energies = []
            columns = []
            for blk in blocks:
                s_b = ao.s[np.ix_(blk, blk)]
                sv, svec = np.linalg.eigh(s_b)
                x_b = svec @ np.diag(sv**-0.5) @ svec.T
                fp = x_b.T @ f[np.ix_(blk, blk)] @ x_b
                e_b, cp = np.linalg.eigh(fp)
                c_b = x_b @ cp
                for k in range(e_b.size):
                    col = np.zeros(ao.n)
                    col[blk] = c_b[:, k]
                    energies.append(e_b[k])
                    columns.append(col)
            order = np.argsort(np.asarray(energies), kind="stable")
            e = np.asarray(energies)[order]
            c = np.stack([columns[i] for i in order], axis=1)
            return e, c

    if density_guess is None:
        _, c = solve(ao.hcore)
        density = 2.0 * c[:, :n_occ] @ c[:, :n_occ].T
    else:
        density = density_guess

    errors: list[np.ndarray] = []
    focks: list[np.ndarray] = []
    energy = 0.0
    for it in range(1, max_iter + 1):
        f = fock_matrix(ao, density)
        err = x.T @ (f @ density @ ao.s - ao.s @ density @ f) @ x
        errors.append(err)
        focks.append(f)
        if len(errors) > diis_size:
            errors.pop(0)
            focks.pop(0)
        if len(errors) > 1:
            m = len(errors)
            b = -np.ones((m + 1, m + 1))
            b[-1, -1] = 0.0
            for i in range(m):
                for j in range(m):
                    b[i, j] = np.sum(errors[i] * errors[j])
            rhs = np.zeros(m + 1)
            rhs[-1] = -1.0
            try:
                coeff = np.linalg.solve(b, rhs)[:m]
                f = sum(cc * ff for cc, ff in zip(coeff, focks))
            except np.linalg.LinAlgError:
                pass
        if level_shift:
            f = f + level_shift * (ao.s - ao.s @ density @ ao.s / 2)
        mo_energy, c = solve(f)
        new_density = 2.0 * c[:, :n_occ] @ c[:, :n_occ].T
        new_energy = float(0.5 * np.sum((ao.hcore + fock_matrix(ao, new_density))
                                        * new_density) + ao.e_nuc)
        d_change = np.max(np.abs(new_density - density))
        e_change = abs(new_energy - energy)
        density, energy = new_density, new_energy
        if it > 1 and e_change < e_tol and d_change < d_tol:
            return SCFResult(energy=energy, mo_coeff=c, mo_energy=mo_energy,
                             density=density, n_iter=it, converged=True)
    raise SCFConvergenceError(f"SCF not converged in {max_iter} iterations "
                              f"(dE={e_change:.2e}, dD={d_change:.2e})")
