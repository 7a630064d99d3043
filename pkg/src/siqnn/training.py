"""Adam optimization of the hybrid model: pre-training and end-to-end stage.

Losses are mean squared errors computed on scaled targets; stop thresholds
are specified in physical units squared (Hartree^2 or (e*a0)^2) and converted
through the dataset's y scaling, so the advertised target loss is honored
regardless of the target's dynamic range. Training stops on the first of:
target loss reached, no relative improvement within the patience window, or
the iteration cap. The returned parameters are always the best seen.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ansatz import CircuitTemplate, ObservableBasis
from .model import DirectWeights, HybridModel, mlp_init
from .spectra import Dataset

THETA_INIT_SCALE = np.pi / 8


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, params: np.ndarray):
        super().__init__(f"non-finite loss at iteration {iteration}")
        self.iteration = iteration
        self.params = params


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    step: int = 0


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update; returns the new parameter vector."""
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    state.step += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1 - state.beta2) * grads**2
    m_hat = state.m / (1 - state.beta1**state.step)
    v_hat = state.v / (1 - state.beta2**state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class StopPolicy:
    target_loss: float = 1e-6       # physical units squared
    patience: int = 200
    min_rel_improvement: float = 0.01
    max_iters: int = 1000

    def __post_init__(self):
        if self.target_loss <= 0 or self.patience <= 0 or self.max_iters <= 0:
            raise ValueError("stop policy fields must be positive")


@dataclass
class TrainResult:
    params: np.ndarray
    best_loss_scaled: float
    best_loss_physical: float
    stop_reason: str                # target_reached | patience_exhausted | max_iters
    n_iters: int
    history: list[tuple[int, float, float]] = field(default_factory=list)


def _train_loop(model: HybridModel, states: np.ndarray, r_scaled: np.ndarray,
                y_scaled: np.ndarray, policy: StopPolicy, lr: float,
                unit_factor: float) -> TrainResult:
    """Full-batch Adam over the model's packed parameters."""
    n = y_scaled.size
    params = model.pack()
    adam = AdamState(lr=lr)
    best = np.inf
    best_params = params.copy()
    since_improvement = 0
    history = []
    stop_reason = "max_iters"
    iters_done = policy.max_iters

    for it in range(policy.max_iters):
        model.unpack(params)
        pred = np.atleast_1d(model.forward(states, r_scaled))
        resid = pred - y_scaled
        loss = float(np.mean(resid**2))
        if not np.isfinite(loss):
            raise TrainingDiverged(it, params)
        history.append((it, loss, loss * unit_factor))
        if loss < best * (1 - policy.min_rel_improvement):
            since_improvement = 0
        else:
            since_improvement += 1
        if loss < best:
            best = loss
            best_params = params.copy()
        if loss * unit_factor <= policy.target_loss:
            stop_reason = "target_reached"
            iters_done = it + 1
            break
        if since_improvement >= policy.patience:
            stop_reason = "patience_exhausted"
            iters_done = it + 1
            break
        d_theta, d_head = model.backward(states, r_scaled, (2.0 / n) * resid)
        params = adam_step(adam, params, np.concatenate([d_theta, d_head]))

    model.unpack(best_params)
    return TrainResult(
        params=best_params,
        best_loss_scaled=best,
        best_loss_physical=best * unit_factor,
        stop_reason=stop_reason,
        n_iters=iters_done,
        history=history,
    )


def _training_view(dataset: Dataset, train_idx: np.ndarray):
    idx = np.asarray(train_idx, dtype=int)
    return dataset.states[idx], dataset.r_scaled[idx], dataset.y_scaled[idx]


def pretrain_siqnn(template: CircuitTemplate, basis: ObservableBasis, dataset: Dataset,
                   train_idx: np.ndarray, policy: StopPolicy | None = None,
                   lr: float = 0.5, seed: int = 0) -> tuple[HybridModel, TrainResult]:
    """Stage one: train circuit parameters and direct observable weights.

    Theta starts near the identity circuit (uniform in +-pi/8); the identity
    term's weight starts at the mean scaled target so the offset is captured
    from iteration zero.
    """
    states, r_scaled, y_scaled = _training_view(dataset, train_idx)
    if y_scaled.size == 0:
        raise ValueError("empty training set")
    policy = policy or StopPolicy(max_iters=1000)
    rng = np.random.default_rng(seed)
    theta0 = rng.uniform(-THETA_INIT_SCALE, THETA_INIT_SCALE, template.param_count)
    w0 = np.zeros(len(basis.terms))
    w0[0] = float(np.mean(y_scaled))
    model = HybridModel(template, theta=theta0, head=DirectWeights(w0), basis=basis,
                        scaling=dataset.scaling.to_dict())
    result = _train_loop(model, states, r_scaled, y_scaled, policy, lr,
                         dataset.scaling.y_half_range**2)
    return model, result


def train_end_to_end(pretrained: HybridModel, dataset: Dataset, train_idx: np.ndarray,
                     policy: StopPolicy | None = None, lr: float = 0.02,
                     seed: int = 0) -> tuple[HybridModel, TrainResult]:
    """Stage two: joint training of circuit parameters and the NN head.

    The circuit starts from the pre-trained parameters; the NN head is freshly
    seeded.
    """
    states, r_scaled, y_scaled = _training_view(dataset, train_idx)
    if y_scaled.size == 0:
        raise ValueError("empty training set")
    policy = policy or StopPolicy(max_iters=2000)
    head = mlp_init(len(pretrained.basis.terms), seed=seed)
    model = HybridModel(pretrained.template, theta=pretrained.theta.copy(), head=head,
                        basis=pretrained.basis, scaling=dataset.scaling.to_dict())
    result = _train_loop(model, states, r_scaled, y_scaled, policy, lr,
                         dataset.scaling.y_half_range**2)
    return model, result


def write_training_log(path: str | Path, result: TrainResult) -> None:
    """CSV of (iteration, scaled loss, physical loss)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss_scaled", "loss_physical"])
        for it, scaled, physical in result.history:
            writer.writerow([it, repr(scaled), repr(physical)])
