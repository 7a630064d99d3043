"""Spin-symmetric QNN template: layer construction, parameter tying, pooling.

Each level acts identically on the alpha qubits (0..n_orb-1) and the beta
qubits (n_orb..2n_orb-1), with beta gates reusing the alpha parameter slots.
A level is a ring of N gates over the active qubits (a single N gate once only
two are active) followed by P gates that pool neighbor pairs onto the
lower-index qubit; an odd leftover qubit is carried to the next level. Levels
repeat until `stop_at` qubits per sector remain; one final N+P level acts on
those survivors without discarding them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .paulis import PauliString, PauliSum, Z
from .simulator import GateInstruction


@dataclass(frozen=True)
class PoolStep:
    pair: tuple[int, int]
    kept: int


@dataclass(frozen=True)
class CircuitTemplate:
    n_orb: int
    stop_at: int
    gates: tuple[GateInstruction, ...]
    param_count: int
    surviving_alpha: tuple[int, ...]
    pool_map: tuple[tuple[PoolStep, ...], ...]
    levels: tuple[dict, ...] = field(repr=False)

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_orb

    @property
    def surviving(self) -> tuple[int, ...]:
        return self.surviving_alpha + tuple(q + self.n_orb for q in self.surviving_alpha)

    def to_json(self) -> str:
        doc = {
            "kind": "siqnn-template-v1",
            "n_orb": self.n_orb,
            "stop_at": self.stop_at,
            "param_count": self.param_count,
            "surviving_alpha": list(self.surviving_alpha),
            "pool_map": [[[list(p.pair), p.kept] for p in lvl] for lvl in self.pool_map],
            "gates": [[g.kind, list(g.qubits), list(g.slots)] for g in self.gates],
            "levels": list(self.levels),
        }
        return json.dumps(doc, sort_keys=True)

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    @classmethod
    def from_json(cls, text: str) -> "CircuitTemplate":
        doc = json.loads(text)
        if doc.get("kind") != "siqnn-template-v1":
            raise ValueError("not a circuit template document")
        gates = tuple(
            GateInstruction(kind, tuple(qubits), tuple(slots))
            for kind, qubits, slots in doc["gates"]
        )
        pool = tuple(
            tuple(PoolStep(tuple(pair), kept) for pair, kept in lvl) for lvl in doc["pool_map"]
        )
        return cls(
            n_orb=doc["n_orb"],
            stop_at=doc["stop_at"],
            gates=gates,
            param_count=doc["param_count"],
            surviving_alpha=tuple(doc["surviving_alpha"]),
            pool_map=pool,
            levels=tuple(doc["levels"]),
        )


def param_count_formula(n_orb: int) -> int:
    """Closed-form slot count 8(n_orb - 1) - 3 for power-of-two n_orb.

    The derivation assumes the active count halves exactly at every level, so
    non-power-of-two inputs are rejected; constructed templates are the
    authority there.
    """
    if n_orb < 2 or n_orb & (n_orb - 1):
        raise ValueError(f"formula requires a power-of-two orbital count, got {n_orb}")
    return 8 * (n_orb - 1) - 3


def build_siqnn(n_orb: int, stop_at: int = 2) -> CircuitTemplate:
    """Construct the spin-tied N/P template for n_orb orbitals."""
    if n_orb < 2:
        raise ValueError("need at least two orbitals")
    if not 2 <= stop_at <= n_orb:
        raise ValueError("stop_at must be between 2 and n_orb")
    gates: list[GateInstruction] = []
    levels: list[dict] = []
    pool_map: list[tuple[PoolStep, ...]] = []
    active = list(range(n_orb))
    next_slot = 0

    def emit_level(qubits: list[int], discard: bool) -> list[int]:
        nonlocal next_slot
        k = len(qubits)
        n_pairs = (
            [(qubits[i], qubits[(i + 1) % k]) for i in range(k)] if k > 2
            else [(qubits[0], qubits[1])]
        )
        n_slots = []
        for pair in n_pairs:
            slots = (next_slot, next_slot + 1, next_slot + 2)
            next_slot += 3
            n_slots.append(slots)
        for (q1, q2), slots in zip(n_pairs, n_slots):
            gates.append(GateInstruction("N", (q1, q2), slots))
        for (q1, q2), slots in zip(n_pairs, n_slots):
            gates.append(GateInstruction("N", (q1 + n_orb, q2 + n_orb), slots))

        p_steps = []
        p_slots = []
        for j in range(k // 2):
            kept, dropped = qubits[2 * j], qubits[2 * j + 1]
            slots = (next_slot, next_slot + 1)
            next_slot += 2
            p_steps.append(PoolStep((kept, dropped), kept))
            p_slots.append(slots)
        # Control (src) is the qubit being pooled away; target (sink) survives.
        for step, slots in zip(p_steps, p_slots):
            gates.append(GateInstruction("P", (step.pair[1], step.kept), slots))
        for step, slots in zip(p_steps, p_slots):
            gates.append(GateInstruction("P", (step.pair[1] + n_orb, step.kept + n_orb), slots))

        pool_map.append(tuple(p_steps))
        levels.append({"active": list(qubits), "n_pairs": len(n_pairs), "p_pairs": len(p_steps),
                       "discard": discard})
        if not discard:
            return qubits
        out = [s.kept for s in p_steps]
        if k % 2:
            out.append(qubits[-1])
        return out

    while len(active) > stop_at:
        active = emit_level(active, discard=True)
    surviving = tuple(active)
    emit_level(active, discard=False)

    return CircuitTemplate(
        n_orb=n_orb,
        stop_at=stop_at,
        gates=tuple(gates),
        param_count=next_slot,
        surviving_alpha=surviving,
        pool_map=tuple(pool_map),
        levels=tuple(levels),
    )


@dataclass(frozen=True)
class ObservableBasis:
    """Spin-swap-invariant all-Z measurement basis over surviving qubits."""

    n_qubits: int
    terms: tuple[PauliSum, ...]

    def __len__(self) -> int:
        return len(self.terms)


def spin_swap_index(indices: np.ndarray, n_orb: int) -> np.ndarray:
    """Basis-index image of exchanging qubit blocks [0,n_orb) <-> [n_orb,2n_orb)."""
    mask = (1 << n_orb) - 1
    return ((indices & mask) << n_orb) | (indices >> n_orb)


def spin_swap_state(amps: np.ndarray, n_orb: int) -> np.ndarray:
    idx = np.arange(amps.shape[-1])
    return amps[..., spin_swap_index(idx, n_orb)]


def build_observable_basis(template: CircuitTemplate) -> ObservableBasis:
    """Orbit-sums of Z-substrings over surviving qubits under the spin swap.

    The identity is term 0; remaining terms are ordered by Z weight, then
    lexicographically by the orbit representative's qubit tuple.
    """
    n_orb = template.n_orb
    n_qubits = template.n_qubits
    survivors = sorted(template.surviving)

    def swap_qubit(q: int) -> int:
        return q + n_orb if q < n_orb else q - n_orb

    orbits: dict[tuple[int, ...], tuple[tuple[int, ...], ...]] = {}
    for bits in range(1 << len(survivors)):
        subset = tuple(survivors[i] for i in range(len(survivors)) if bits >> i & 1)
        partner = tuple(sorted(swap_qubit(q) for q in subset))
        rep = min(subset, partner)
        members = (subset,) if partner == subset else (rep, max(subset, partner))
        orbits[rep] = members

    def z_string(qubits: tuple[int, ...]) -> PauliString:
        ops = bytearray(n_qubits)
        for q in qubits:
            ops[q] = Z
        return PauliString(bytes(ops))

    terms = []
    for rep in sorted(orbits, key=lambda t: (len(t), t)):
        term = PauliSum(n_qubits)
        for member in orbits[rep]:
            term.add_term(z_string(member), 1.0)
        terms.append(term)
    return ObservableBasis(n_qubits=n_qubits, terms=tuple(terms))
