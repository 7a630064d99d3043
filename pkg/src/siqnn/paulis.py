"""Pauli-string algebra: strings, weighted sums, dense matrices, qwc grouping.

Strings are tensor products of {I, X, Y, Z} over a qubit register. Qubit 0 is
the least significant bit of a computational-basis index, so the dense matrix
of a string is kron(P[n-1], ..., P[0]).
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping

import numpy as np

I, X, Y, Z = 0, 1, 2, 3

_LABELS = "IXYZ"
_CODE = {c: i for i, c in enumerate(_LABELS)}

# Single-qubit products: _PROD_CODE[a][b] = code of a*b, _PROD_PHASE[a][b] in {1,i,-1,-i}.
_PROD_CODE = np.zeros((4, 4), dtype=np.uint8)
_PROD_PHASE = np.zeros((4, 4), dtype=complex)
_MATS = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
for _a in range(4):
    for _b in range(4):
        _m = _MATS[_a] @ _MATS[_b]
        for _c in range(4):
            for _ph in (1, 1j, -1, -1j):
                if np.allclose(_m, _ph * _MATS[_c]):
                    _PROD_CODE[_a, _b] = _c
                    _PROD_PHASE[_a, _b] = _ph


class PauliString:
    """Immutable tensor product of single-qubit Paulis; phases live in coefficients."""

    __slots__ = ("ops", "x_mask", "z_mask", "n_y", "_hash")

    def __init__(self, ops: bytes | Iterable[int]):
        if not isinstance(ops, (bytes, bytearray)):
            ops = bytes(int(o) for o in ops)  # robust to numpy integer arrays
        ops = bytes(ops)
        if any(o > 3 for o in ops):
            raise ValueError("Pauli codes must be in 0..3")
        self.ops = ops
        x = z = 0
        ny = 0
        for q, o in enumerate(ops):
            if o == X or o == Y:
                x |= 1 << q
            if o == Z or o == Y:
                z |= 1 << q
            if o == Y:
                ny += 1
        self.x_mask = x
        self.z_mask = z
        self.n_y = ny
        self._hash = hash(ops)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Build from a label like 'XIZ' where character 0 acts on qubit 0."""
        return cls(bytes(_CODE[c] for c in label))

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(bytes(n_qubits))

    @classmethod
    def single(cls, n_qubits: int, qubit: int, op: str) -> "PauliString":
        ops = bytearray(n_qubits)
        ops[qubit] = _CODE[op]
        return cls(bytes(ops))

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    @property
    def weight(self) -> int:
        """Number of non-identity factors."""
        return sum(1 for o in self.ops if o != I)

    def is_all_z(self) -> bool:
        return all(o in (I, Z) for o in self.ops)

    def support(self) -> tuple[int, ...]:
        return tuple(q for q, o in enumerate(self.ops) if o != I)

    def label(self) -> str:
        return "".join(_LABELS[o] for o in self.ops)

    def qwc(self, other: "PauliString") -> bool:
        """Qubit-wise commuting: on every qubit the factors are equal or one is I."""
        return all(a == b or a == I or b == I for a, b in zip(self.ops, other.ops))

    def phases(self, indices: np.ndarray) -> np.ndarray:
        """Phase factors of P|k> = phase(k)|k ^ x_mask> for basis indices k."""
        par = np.bitwise_count(np.bitwise_and(indices, self.z_mask)).astype(np.int64)
        ph = np.where(par & 1, -1.0, 1.0).astype(complex)
        return (1j**self.n_y) * ph

    def to_dense(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        idx = np.arange(dim)
        m = np.zeros((dim, dim), dtype=complex)
        m[idx ^ self.x_mask, idx] = self.phases(idx)
        return m

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliString) and self.ops == other.ops

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "PauliString") -> bool:
        return self.ops < other.ops

    def __repr__(self) -> str:
        return f"PauliString({self.label()!r})"


def multiply(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Product of two strings as (phase, string) with phase in {1, i, -1, -i}."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"length mismatch: {a.n_qubits} vs {b.n_qubits}")
    phase = 1 + 0j
    out = bytearray(a.n_qubits)
    for q, (oa, ob) in enumerate(zip(a.ops, b.ops)):
        out[q] = _PROD_CODE[oa, ob]
        phase *= _PROD_PHASE[oa, ob]
    return phase, PauliString(bytes(out))


class PauliSum:
    """Weighted sum of Pauli strings over one register.

    Duplicate strings are merged on the fly; simplify() removes numerical dust.
    """

    def __init__(self, n_qubits: int, terms: Mapping[PauliString, complex] | None = None):
        self.n_qubits = n_qubits
        self.terms: dict[PauliString, complex] = {}
        if terms:
            for s, c in terms.items():
                self.add_term(s, c)

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, {PauliString.identity(n_qubits): coeff})

    @classmethod
    def from_label(cls, label: str, coeff: complex = 1.0) -> "PauliSum":
        s = PauliString.from_label(label)
        return cls(s.n_qubits, {s: coeff})

    def add_term(self, string: PauliString, coeff: complex) -> None:
        if string.n_qubits != self.n_qubits:
            raise ValueError("string length does not match register size")
        c = self.terms.get(string)
        if c is None:
            self.terms[string] = complex(coeff)
        else:
            self.terms[string] = c + coeff

    def copy(self) -> "PauliSum":
        out = PauliSum(self.n_qubits)
        out.terms = dict(self.terms)
        return out

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[PauliString, complex]]:
        return iter(self.terms.items())

    def __add__(self, other: "PauliSum") -> "PauliSum":
        out = self.copy()
        for s, c in other:
            out.add_term(s, c)
        return out

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (other * -1.0)

    def __mul__(self, scalar: complex) -> "PauliSum":
        out = PauliSum(self.n_qubits)
        out.terms = {s: c * scalar for s, c in self.terms.items()}
        return out

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        """Operator product, expanding all cross terms with their phases."""
        out = PauliSum(self.n_qubits)
        for sa, ca in self:
            for sb, cb in other:
                phase, prod = multiply(sa, sb)
                out.add_term(prod, ca * cb * phase)
        return out

    def dagger(self) -> "PauliSum":
        out = PauliSum(self.n_qubits)
        out.terms = {s: c.conjugate() for s, c in self.terms.items()}
        return out

    def simplify(self, tol: float = 1e-12) -> "PauliSum":
        """Drop coefficients (and real/imag components) below tol. Returns self."""
        cleaned: dict[PauliString, complex] = {}
        for s, c in self.terms.items():
            re = c.real if abs(c.real) >= tol else 0.0
            im = c.imag if abs(c.imag) >= tol else 0.0
            if re != 0.0 or im != 0.0:
                cleaned[s] = complex(re, im)
        self.terms = cleaned
        return self

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.imag) <= tol for c in self.terms.values())

    def commutator(self, other: "PauliSum") -> "PauliSum":
        return (self @ other) - (other @ self)

    def to_dense(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix; guarded against accidental huge registers."""
        if self.n_qubits > 14:
            raise ValueError(f"register too large for dense matrix: {self.n_qubits} qubits")
        dim = 1 << self.n_qubits
        m = np.zeros((dim, dim), dtype=complex)
        idx = np.arange(dim)
        for s, c in self.terms.items():
            m[idx ^ s.x_mask, idx] += c * s.phases(idx)
        return m

    def __repr__(self) -> str:
        parts = [f"{c:+.6g}*{s.label()}" for s, c in sorted(self.terms.items(), key=lambda t: t[0].ops)]
        return f"PauliSum({self.n_qubits}q: " + " ".join(parts[:8]) + (" ..." if len(parts) > 8 else "") + ")"


def qwc_group(operator: PauliSum) -> list[list[tuple[PauliString, complex]]]:
    """Partition terms into qubit-wise commuting groups.

    Greedy first-fit over terms sorted by descending |coefficient|; every pair
    inside a group is qwc, so one measurement setting covers the group.
    """
    ordered = sorted(operator.terms.items(), key=lambda t: (-abs(t[1]), t[0].ops))
    groups: list[list[tuple[PauliString, complex]]] = []
    for string, coeff in ordered:
        for group in groups:
            if all(string.qwc(member) for member, _ in group):
                group.append((string, coeff))
                break
        else:
            groups.append([(string, coeff)])
    return groups
