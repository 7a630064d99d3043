"""Jordan-Wigner images of fermionic operators and molecular operator builders.

Spin-orbital ordering: alpha spin-orbitals occupy qubits 0..n_orb-1 and beta
spin-orbitals occupy qubits n_orb..2*n_orb-1; within each block orbitals are
ordered by energy. Occupied orbital <-> qubit in |1>.
"""

from __future__ import annotations

import numpy as np

from .integrals import ActiveSpaceIntegrals
from .paulis import PauliString, PauliSum, X, Y, Z

COEFF_DROP_TOL = 1e-12


def spin_orbital_qubit(orbital: int, spin: int, n_orb: int) -> int:
    """Qubit index of (orbital, spin) with spin 0 = alpha, 1 = beta."""
    return orbital + spin * n_orb


def jw_creation(p: int, n_qubits: int) -> PauliSum:
    """Creation operator on spin-orbital p: (X_p - iY_p)/2 times Z on all j < p."""
    if not 0 <= p < n_qubits:
        raise ValueError(f"index {p} out of range for {n_qubits} qubits")
    x_ops = bytearray(n_qubits)
    y_ops = bytearray(n_qubits)
    for j in range(p):
        x_ops[j] = Z
        y_ops[j] = Z
    x_ops[p] = X
    y_ops[p] = Y
    out = PauliSum(n_qubits)
    out.add_term(PauliString(bytes(x_ops)), 0.5)
    out.add_term(PauliString(bytes(y_ops)), -0.5j)
    return out


def jw_annihilation(p: int, n_qubits: int) -> PauliSum:
    return jw_creation(p, n_qubits).dagger()


def number_operator(n_qubits: int) -> PauliSum:
    """Total particle number: sum_p a_p^dag a_p = sum_p (I - Z_p)/2."""
    out = PauliSum.identity(n_qubits, 0.5 * n_qubits)
    for p in range(n_qubits):
        out.add_term(PauliString.single(n_qubits, p, "Z"), -0.5)
    return out


def sz_operator(n_orb: int) -> PauliSum:
    """S_z = (N_alpha - N_beta)/2 in the alpha/beta block ordering."""
    n_qubits = 2 * n_orb
    out = PauliSum(n_qubits)
    for p in range(n_orb):
        out.add_term(PauliString.single(n_qubits, p, "Z"), -0.25)
        out.add_term(PauliString.single(n_qubits, p + n_orb, "Z"), 0.25)
    return out


def s2_operator(n_orb: int) -> PauliSum:
    """Total spin S^2 = S_z^2 + (S+S- + S-S+)/2, assembled from JW ladder images.

    S+ = sum_p a_{p,alpha}^dag a_{p,beta}. Eigenvalues are S(S+1).
    """
    n_qubits = 2 * n_orb
    sz = sz_operator(n_orb)
    s_plus = PauliSum(n_qubits)
    for p in range(n_orb):
        s_plus += jw_creation(p, n_qubits) @ jw_annihilation(p + n_orb, n_qubits)
    s_minus = s_plus.dagger()
    out = (sz @ sz) + 0.5 * ((s_plus @ s_minus) + (s_minus @ s_plus))
    return out.simplify(COEFF_DROP_TOL)


def _one_body(matrix: np.ndarray, n_orb: int) -> PauliSum:
    """JW image of sum_pq M_pq a_p^dag a_q summed over both spins."""
    n_qubits = 2 * n_orb
    out = PauliSum(n_qubits)
    creation = [jw_creation(q, n_qubits) for q in range(n_qubits)]
    annihilation = [c.dagger() for c in creation]
    for p in range(n_orb):
        for q in range(n_orb):
            c = matrix[p, q]
            if abs(c) < COEFF_DROP_TOL:
                continue
            for spin in (0, 1):
                pq = creation[spin_orbital_qubit(p, spin, n_orb)] @ annihilation[
                    spin_orbital_qubit(q, spin, n_orb)
                ]
                out += c * pq
    return out


def build_qubit_hamiltonian(ints: ActiveSpaceIntegrals) -> PauliSum:
    """Qubit Hamiltonian of the active-space electronic Hamiltonian.

    H = sum_pq h_pq a_p^dag a_q + 1/2 sum_pqrs h_pqrs a_p^dag a_q^dag a_r a_s
    + e_core, with spatial indices expanded over spins as
    a_{p,s}^dag a_{q,t}^dag a_{r,t} a_{s',s} (first/last and middle pairs share
    a spin), then mapped through Jordan-Wigner. The result is Hermitian and
    commutes with total number and S_z.
    """
    ints.check()
    n_orb = ints.n_orb
    n_qubits = 2 * n_orb
    out = PauliSum.identity(n_qubits, ints.e_core)
    out += _one_body(ints.h1, n_orb)

    creation = [jw_creation(q, n_qubits) for q in range(n_qubits)]
    annihilation = [c.dagger() for c in creation]
    h2 = ints.h2
    for p in range(n_orb):
        for q in range(n_orb):
            for r in range(n_orb):
                for s in range(n_orb):
                    c = h2[p, q, r, s]
                    if abs(c) < COEFF_DROP_TOL:
                        continue
                    for sp in (0, 1):
                        for tq in (0, 1):
                            term = (
                                creation[spin_orbital_qubit(p, sp, n_orb)]
                                @ creation[spin_orbital_qubit(q, tq, n_orb)]
                                @ annihilation[spin_orbital_qubit(r, tq, n_orb)]
                                @ annihilation[spin_orbital_qubit(s, sp, n_orb)]
                            )
                            out += (0.5 * c) * term
    out.simplify(COEFF_DROP_TOL)
    if not out.is_hermitian(1e-9):
        raise ValueError("qubit Hamiltonian came out non-Hermitian; integrals violate Hermiticity")
    return out


def build_dipole_operator(ints: ActiveSpaceIntegrals) -> tuple[PauliSum, PauliSum, PauliSum]:
    """Cartesian dipole components as qubit operators (units e*a0).

    Each component is the JW image of sum_pq D_pq a_p^dag a_q over both spins
    plus the nuclear/core contribution times identity.
    """
    ints.check()
    components = []
    for c in range(3):
        op = PauliSum.identity(2 * ints.n_orb, ints.nuclear_dipole[c])
        op += _one_body(ints.dipole1[c], ints.n_orb)
        op.simplify(COEFF_DROP_TOL)
        if not op.is_hermitian(1e-9):
            raise ValueError("dipole component came out non-Hermitian")
        components.append(op)
    return components[0], components[1], components[2]
