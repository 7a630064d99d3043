"""Hybrid model: y(R) = sum_i w_i(R) * <psi0| U(theta)^dag P_i U(theta) |psi0>.

The measurement basis P_i is the all-Z spin-symmetric basis from the ansatz
module, so every term is estimated from a single computational-basis setting.
Weights come either from a plain vector (pre-training) or from a one-hidden-
layer tanh network taking the scaled distance R as input. All model math runs
on scaled quantities; unit conversion lives in the dataset layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ansatz import CircuitTemplate, ObservableBasis, build_observable_basis
from .simulator import StateVector, apply_circuit, gradient_diag_batch, z_diagonal

MLP_PARAM_BUDGET = 41


@dataclass
class DirectWeights:
    w: np.ndarray

    def n_params(self) -> int:
        return self.w.size

    def pack(self) -> np.ndarray:
        return self.w.copy()

    def unpack(self, flat: np.ndarray) -> None:
        self.w = flat.copy()


@dataclass
class MLP:
    """1 -> hidden(tanh) -> k, parameter count 2h + (h+1)k."""

    w1: np.ndarray  # (h,)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (k, h)
    b2: np.ndarray  # (k,)

    @property
    def hidden(self) -> int:
        return self.w1.size

    @property
    def out_dim(self) -> int:
        return self.b2.size

    def n_params(self) -> int:
        return 2 * self.hidden + (self.hidden + 1) * self.out_dim

    def pack(self) -> np.ndarray:
        return np.concatenate([self.w1, self.b1, self.w2.ravel(), self.b2])

    def unpack(self, flat: np.ndarray) -> None:
        h, k = self.hidden, self.out_dim
        self.w1 = flat[:h].copy()
        self.b1 = flat[h:2 * h].copy()
        self.w2 = flat[2 * h:2 * h + h * k].reshape(k, h).copy()
        self.b2 = flat[2 * h + h * k:].copy()


def default_hidden_width(out_dim: int, budget: int = MLP_PARAM_BUDGET) -> int:
    """Largest hidden width whose parameter total stays within the budget.

    Never below one hidden unit, even when the budget is unreachable.
    """
    return max(1, (budget - out_dim) // (out_dim + 2))


def mlp_init(out_dim: int, seed: int, hidden: int | None = None) -> MLP:
    """Uniform init in +-1/sqrt(fan_in) per layer, seeded."""
    h = default_hidden_width(out_dim) if hidden is None else hidden
    rng = np.random.default_rng(seed)
    lim2 = 1.0 / np.sqrt(h)
    return MLP(
        w1=rng.uniform(-1.0, 1.0, size=h),
        b1=rng.uniform(-1.0, 1.0, size=h),
        w2=rng.uniform(-lim2, lim2, size=(out_dim, h)),
        b2=rng.uniform(-lim2, lim2, size=out_dim),
    )


def mlp_forward(mlp: MLP, r_scaled) -> np.ndarray:
    """Weights for scalar or (B,) input; returns (k,) or (B, k)."""
    r = np.asarray(r_scaled, dtype=float)
    hid = np.tanh(np.multiply.outer(r, mlp.w1) + mlp.b1)
    return hid @ mlp.w2.T + mlp.b2


def mlp_backward(mlp: MLP, r_scaled, dw: np.ndarray) -> np.ndarray:
    """Gradient of sum_b dw_b . w(r_b) w.r.t. packed MLP parameters."""
    r = np.atleast_1d(np.asarray(r_scaled, dtype=float))
    dw = dw.reshape(r.size, mlp.out_dim)
    hid = np.tanh(np.multiply.outer(r, mlp.w1) + mlp.b1)  # (B, h)
    dhid = dw @ mlp.w2  # (B, h)
    dpre = dhid * (1.0 - hid**2)
    g_w1 = dpre.T @ r
    g_b1 = dpre.sum(axis=0)
    g_w2 = dw.T @ hid
    g_b2 = dw.sum(axis=0)
    return np.concatenate([g_w1, g_b1, g_w2.ravel(), g_b2])


class HybridModel:
    """Circuit parameters plus a weight head over the measurement basis."""

    def __init__(self, template: CircuitTemplate, theta: np.ndarray | None = None,
                 head: DirectWeights | MLP | None = None,
                 basis: ObservableBasis | None = None,
                 scaling: dict | None = None):
        self.template = template
        self.basis = basis if basis is not None else build_observable_basis(template)
        k = len(self.basis)
        self.theta = np.zeros(template.param_count) if theta is None else np.asarray(theta, float)
        if self.theta.size != template.param_count:
            raise ValueError("theta length does not match the template's parameter count")
        self.head = DirectWeights(np.zeros(k)) if head is None else head
        head_dim = self.head.w.size if isinstance(self.head, DirectWeights) else self.head.out_dim
        if head_dim != k:
            raise ValueError("head output size does not match the observable basis")
        self.scaling = scaling
        # Rows are the computational-basis diagonals of the basis terms.
        self.diagonals = np.stack([z_diagonal(t, template.n_qubits) for t in self.basis.terms])

    @property
    def n_qubits(self) -> int:
        return self.template.n_qubits

    def weights(self, r_scaled) -> np.ndarray:
        if isinstance(self.head, DirectWeights):
            r = np.asarray(r_scaled, dtype=float)
            return np.broadcast_to(self.head.w, r.shape + self.head.w.shape).copy()
        return mlp_forward(self.head, r_scaled)

    def _check_state(self, amps: np.ndarray) -> None:
        if amps.shape[-1] != 1 << self.n_qubits:
            raise ValueError("state size does not match the template register")

    def term_expectations(self, amps: np.ndarray) -> np.ndarray:
        """Post-circuit expectations of every basis term; amps (..., 2^n)."""
        self._check_state(amps)
        out = apply_circuit(np.array(amps, dtype=complex), self.template.gates, self.theta)
        probs = np.abs(out) ** 2
        return probs @ self.diagonals.T

    def forward(self, state: StateVector | np.ndarray, r_scaled) -> float | np.ndarray:
        amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
        e = self.term_expectations(amps)
        w = self.weights(r_scaled)
        y = np.sum(w * e, axis=-1)
        return float(y) if np.ndim(y) == 0 else y

    def forward_shots(self, state: StateVector, r_scaled: float, n_shots: int, seed: int) -> float:
        """One sampling pass estimates every term; plug-in weighted sum."""
        amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
        self._check_state(amps)
        out = apply_circuit(amps.copy(), self.template.gates, self.theta)
        probs = np.abs(out) ** 2
        probs = probs / probs.sum()
        rng = np.random.default_rng(seed)
        freq = rng.multinomial(n_shots, probs) / n_shots
        e_hat = freq @ self.diagonals.T
        w = self.weights(r_scaled)
        return float(np.dot(w, e_hat))

    def backward(self, states: np.ndarray, r_scaled, dl_dy: np.ndarray
                 ) -> tuple[np.ndarray, np.ndarray]:
        """(d/dtheta, d/dhead) of sum_b dl_dy_b * y_b over a (B, 2^n) batch."""
        states = np.atleast_2d(np.asarray(states, dtype=complex))
        r = np.atleast_1d(np.asarray(r_scaled, dtype=float))
        dl_dy = np.atleast_1d(np.asarray(dl_dy, dtype=float))
        e = self.term_expectations(states)
        w = np.atleast_2d(self.weights(r))
        dw = dl_dy[:, None] * e
        if isinstance(self.head, DirectWeights):
            d_head = dw.sum(axis=0)
        else:
            d_head = mlp_backward(self.head, r, dw)
        diag = (dl_dy[:, None] * w) @ self.diagonals
        d_theta = gradient_diag_batch(list(self.template.gates), self.theta, states, diag)
        return d_theta, d_head

    def pack(self) -> np.ndarray:
        return np.concatenate([self.theta, self.head.pack()])

    def unpack(self, flat: np.ndarray) -> None:
        p = self.template.param_count
        self.theta = flat[:p].copy()
        self.head.unpack(flat[p:])

    def save(self, path: str | Path) -> None:
        doc = {
            "kind": "siqnn-checkpoint-v1",
            "template_hash": self.template.hash(),
            "template": json.loads(self.template.to_json()),
            "theta": [float(v) for v in self.theta],
            "scaling": self.scaling,
        }
        if isinstance(self.head, DirectWeights):
            doc["head"] = {"kind": "direct", "w": [float(v) for v in self.head.w]}
        else:
            doc["head"] = {
                "kind": "mlp",
                "hidden": self.head.hidden,
                "out_dim": self.head.out_dim,
                "params": [float(v) for v in self.head.pack()],
            }
        Path(path).write_text(json.dumps(doc, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "HybridModel":
        doc = json.loads(Path(path).read_text())
        if doc.get("kind") != "siqnn-checkpoint-v1":
            raise ValueError(f"{path}: not a model checkpoint")
        template = CircuitTemplate.from_json(json.dumps(doc["template"]))
        if template.hash() != doc["template_hash"]:
            raise ValueError("checkpoint template hash mismatch")
        head_doc = doc["head"]
        if head_doc["kind"] == "direct":
            head = DirectWeights(np.asarray(head_doc["w"], dtype=float))
        else:
            h, k = head_doc["hidden"], head_doc["out_dim"]
            head = MLP(np.zeros(h), np.zeros(h), np.zeros((k, h)), np.zeros(k))
            head.unpack(np.asarray(head_doc["params"], dtype=float))
        return cls(template, theta=np.asarray(doc["theta"], dtype=float), head=head,
                   scaling=doc.get("scaling"))
