"""Statevector simulation: N/P gates, expectations, sampling, adjoint gradients.

Conventions (pinned for reproducibility):
  - qubit q is bit q of the basis index (qubit 0 = least significant bit);
  - two-qubit matrices act in the basis |b_first, b_second> with the first
    listed qubit as the major bit, index = 2*b_first + b_second;
  - N(ti,tj,tk) = exp[i(ti XX + tj YY + tk ZZ)], applied as the product of the
    three commuting Pauli rotations exp(i t P) = cos(t) I + i sin(t) P;
  - P(tn,tm) = CRZ(tn) followed by CRX(tm), control = first qubit (src),
    target = second (sink); controlled rotations apply exp(-i t/2 P) on the
    target when the control is |1>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paulis import PauliString, PauliSum

_XX = np.array([[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=complex)
_YY = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)
_ZZ = np.diag([1, -1, -1, 1]).astype(complex)
_I4 = np.eye(4, dtype=complex)


class StateVector:
    """Normalized 2^n complex amplitude vector."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, amplitudes: np.ndarray, normalize: bool = False):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        n = int(np.log2(amplitudes.size))
        if 1 << n != amplitudes.size:
            raise ValueError("amplitude vector length must be a power of two")
        if normalize:
            amplitudes = amplitudes / np.linalg.norm(amplitudes)
        elif abs(np.linalg.norm(amplitudes) - 1.0) > 1e-10:
            raise ValueError("state is not normalized")
        self.n_qubits = n
        self.amplitudes = amplitudes

    @classmethod
    def basis_state(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class GateInstruction:
    """One two-qubit gate: kind 'N' (3 slots) or 'P' (2 slots).

    Slots index a shared parameter vector; spin-tied gates repeat slot indices.
    For 'P' the first qubit is the control (src), the second the pooled-onto
    target (sink).
    """

    kind: str
    qubits: tuple[int, int]
    slots: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ("N", "P"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.qubits[0] == self.qubits[1]:
            raise ValueError("gate qubits must be distinct")
        if len(self.slots) != (3 if self.kind == "N" else 2):
            raise ValueError(f"{self.kind} gate takes {3 if self.kind == 'N' else 2} slots")


def _pauli_rotation(theta: float, pauli4: np.ndarray) -> np.ndarray:
    return np.cos(theta) * _I4 + 1j * np.sin(theta) * pauli4


def n_gate_matrix(ti: float, tj: float, tk: float) -> np.ndarray:
    return _pauli_rotation(ti, _XX) @ _pauli_rotation(tj, _YY) @ _pauli_rotation(tk, _ZZ)


def n_gate_dmatrices(ti: float, tj: float, tk: float) -> list[np.ndarray]:
    m = n_gate_matrix(ti, tj, tk)
    return [1j * _XX @ m, 1j * _YY @ m, 1j * _ZZ @ m]


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _controlled(block: np.ndarray) -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[2:, 2:] = block
    return m


def p_gate_matrix(tn: float, tm: float) -> np.ndarray:
    return _controlled(_rx(tm)) @ _controlled(_rz(tn))


def _controlled_derivative(dblock: np.ndarray) -> np.ndarray:
    """d/dtheta of a controlled rotation: zero on the control-0 block."""
    m = np.zeros((4, 4), dtype=complex)
    m[2:, 2:] = dblock
    return m


def p_gate_dmatrices(tn: float, tm: float) -> list[np.ndarray]:
    drz = np.diag([-0.5j * np.exp(-0.5j * tn), 0.5j * np.exp(0.5j * tn)])
    c, s = np.cos(tm / 2), np.sin(tm / 2)
    drx = 0.5 * np.array([[-s, -1j * c], [-1j * c, -s]])
    return [
        _controlled(_rx(tm)) @ _controlled_derivative(drz),
        _controlled_derivative(drx) @ _controlled(_rz(tn)),
    ]


def gate_matrix(gate: GateInstruction, params: np.ndarray) -> np.ndarray:
    vals = [params[s] for s in gate.slots]
    return n_gate_matrix(*vals) if gate.kind == "N" else p_gate_matrix(*vals)


def gate_dmatrices(gate: GateInstruction, params: np.ndarray) -> list[np.ndarray]:
    vals = [params[s] for s in gate.slots]
    return n_gate_dmatrices(*vals) if gate.kind == "N" else p_gate_dmatrices(*vals)


def apply_two_qubit(amps: np.ndarray, mat4: np.ndarray, q1: int, q2: int) -> np.ndarray:
    """Apply a 4x4 matrix to qubits (q1, q2) of (..., 2^n) amplitudes."""
    dim = amps.shape[-1]
    n = dim.bit_length() - 1
    if not (0 <= q1 < n and 0 <= q2 < n) or q1 == q2:
        raise ValueError(f"invalid qubit pair ({q1}, {q2}) for {n} qubits")
    batch = amps.shape[:-1]
    a = amps.reshape(batch + (2,) * n)
    ax1, ax2 = len(batch) + n - 1 - q1, len(batch) + n - 1 - q2
    a = np.moveaxis(a, (ax1, ax2), (-2, -1))
    shape = a.shape
    a = a.reshape(-1, 4) @ mat4.T
    a = np.moveaxis(a.reshape(shape), (-2, -1), (ax1, ax2))
    return np.ascontiguousarray(a).reshape(batch + (dim,))


def apply_circuit(amps: np.ndarray, gates: list[GateInstruction], params: np.ndarray) -> np.ndarray:
    for gate in gates:
        amps = apply_two_qubit(amps, gate_matrix(gate, params), *gate.qubits)
    return amps


def apply_n_gate(state: StateVector, q1: int, q2: int, ti: float, tj: float, tk: float) -> StateVector:
    state.amplitudes = apply_two_qubit(state.amplitudes, n_gate_matrix(ti, tj, tk), q1, q2)
    return state


def apply_p_gate(state: StateVector, src: int, sink: int, tn: float, tm: float) -> StateVector:
    state.amplitudes = apply_two_qubit(state.amplitudes, p_gate_matrix(tn, tm), src, sink)
    return state


def apply_pauli(amps: np.ndarray, string: PauliString) -> np.ndarray:
    """P|psi> for a single string on (..., 2^n) amplitudes."""
    idx = np.arange(amps.shape[-1])
    flipped = idx ^ string.x_mask
    return (string.phases(flipped)) * amps[..., flipped]


def apply_pauli_sum(amps: np.ndarray, op: PauliSum) -> np.ndarray:
    out = np.zeros_like(amps)
    for string, coeff in op:
        out += coeff * apply_pauli(amps, string)
    return out


def expectation(state: StateVector, obs: PauliSum) -> float:
    """<psi|O|psi> for Hermitian O, exact to float precision."""
    if (1 << obs.n_qubits) != state.amplitudes.size:
        raise ValueError("observable register size does not match the state")
    if not obs.is_hermitian():
        raise ValueError("observable is not Hermitian")
    amps = state.amplitudes
    val = np.vdot(amps, apply_pauli_sum(amps, obs))
    return float(val.real)


def z_diagonal(obs: PauliSum, n_qubits: int) -> np.ndarray:
    """Diagonal of an all-I/Z observable in the computational basis."""
    idx = np.arange(1 << n_qubits)
    diag = np.zeros(1 << n_qubits)
    for string, coeff in obs:
        if string.x_mask:
            raise ValueError(f"term {string.label()} contains X/Y; not a Z-basis observable")
        par = np.bitwise_count(np.bitwise_and(idx, string.z_mask)).astype(np.int64)
        diag += coeff.real * np.where(par & 1, -1.0, 1.0)
    return diag


def sample_z_basis(state: StateVector, n_shots: int, seed: int) -> dict[int, int]:
    """Computational-basis outcome counts, deterministic for a given seed."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    probs = state.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    hist = rng.multinomial(n_shots, probs)
    nz = np.nonzero(hist)[0]
    return {int(k): int(hist[k]) for k in nz}


def estimate_z_observable(counts: dict[int, int], obs: PauliSum) -> float:
    """Plug-in estimate of an all-Z observable from z-basis counts."""
    total = sum(counts.values())
    keys = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
    vals = np.fromiter(counts.values(), dtype=np.int64, count=len(counts))
    est = 0.0
    for string, coeff in obs:
        if string.x_mask:
            raise ValueError(f"term {string.label()} contains X/Y; measure in its own basis")
        par = np.bitwise_count(np.bitwise_and(keys, string.z_mask)).astype(np.int64)
        eig = np.where(par & 1, -1.0, 1.0)
        est += coeff.real * float(np.dot(eig, vals)) / total
    return est


def _adjoint_accumulate(gates, params, psi_final, lam, n_params) -> np.ndarray:
    """Reverse sweep given lambda = O|psi_final>; sums over any batch axes."""
    grads = np.zeros(n_params)
    ket = psi_final
    for gate in reversed(gates):
        mat = gate_matrix(gate, params)
        dmats = gate_dmatrices(gate, params)
        ket = apply_two_qubit(ket, mat.conj().T, *gate.qubits)
        for slot, dmat in zip(gate.slots, dmats):
            dket = apply_two_qubit(ket, dmat, *gate.qubits)
            grads[slot] += 2.0 * float(np.sum(np.conj(lam) * dket).real)
        lam = apply_two_qubit(lam, mat.conj().T, *gate.qubits)
    return grads


def gradient(circuit: list[GateInstruction], params: np.ndarray, state_in: StateVector,
             obs: PauliSum) -> np.ndarray:
    """Exact d<O>/dparams by adjoint reverse sweep; tied slots accumulate."""
    if not obs.is_hermitian():
        raise ValueError("observable is not Hermitian")
    params = np.asarray(params, dtype=float)
    psi = apply_circuit(state_in.amplitudes.copy(), circuit, params)
    lam = apply_pauli_sum(psi, obs)
    return _adjoint_accumulate(circuit, params, psi, lam, params.size)


def gradient_diag_batch(circuit: list[GateInstruction], params: np.ndarray,
                        states_in: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """Adjoint gradient of sum_b <psi_b| diag_b |psi_b> over a (B, 2^n) batch.

    `diag` holds one real diagonal observable per batch row; per-sample loss
    weights are folded into the diagonals by the caller.
    """
    params = np.asarray(params, dtype=float)
    psi = apply_circuit(states_in.copy(), circuit, params)
    lam = diag * psi
    return _adjoint_accumulate(circuit, params, psi, lam, params.size)
