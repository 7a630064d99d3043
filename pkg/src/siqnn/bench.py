"""Benchmark harness: training-set sampling, replicated runs, statistics.

Every cell of the run matrix (dataset x size x replicate x model) is seeded
from a master seed through spawn keys, so records are reproducible and the
matrix can be distributed across workers without shared state. Test sets are
always the complement of the training set on the scan grid; MSEs are reported
in physical units (Hartree^2 or (e*a0)^2).
"""

from __future__ import annotations

import csv
import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import gpr_fit, nn_fit, svr_fit
from .model import HybridModel, default_hidden_width
from .paulis import PauliSum, qwc_group
from .simulator import apply_circuit
from .spectra import Dataset
from .training import StopPolicy, TrainingDiverged, pretrain_siqnn, train_end_to_end

QUANTUM_MODELS = ("siqnn", "siqnn-nn")
CLASSICAL_MODELS = ("nn", "gpr", "svr")
ALL_MODELS = QUANTUM_MODELS + CLASSICAL_MODELS

DEFAULT_SIZES = (4, 5, 6, 7, 8)
DEFAULT_REPLICATES = 50


@dataclass(frozen=True)
class SamplingPlan:
    size: int
    strategy: str = "bo"          # bo | equal | random
    seed: int = 0
    bo_lengthscale: float = 0.2   # on the scaled R domain
    bo_noise: float = 1e-6

    def __post_init__(self):
        if self.strategy not in ("bo", "equal", "random"):
            raise ValueError(f"unknown sampling strategy {self.strategy!r}")
        if self.size < 3 and self.strategy == "bo":
            raise ValueError("bo sampling seeds one point per region and needs size >= 3")


def quantum_param_total(template, n_basis_terms: int) -> int:
    """Circuit slots plus default NN-head parameters: the budget the classical
    NN baseline must match."""
    h = default_hidden_width(n_basis_terms)
    return template.param_count + 2 * h + (h + 1) * n_basis_terms


def region_bounds(r: np.ndarray) -> tuple[float, float]:
    """Two cut points splitting [min, max] into repulsive/equilibrium/attractive thirds."""
    lo, hi = float(r.min()), float(r.max())
    return lo + (hi - lo) / 3, lo + 2 * (hi - lo) / 3


def equal_indices(m: int, size: int) -> np.ndarray:
    """Evenly spaced grid indices; fractional positions round toward the lower index."""
    if size > m:
        raise ValueError(f"requested {size} points from a grid of {m}")
    if size == 1:
        return np.array([0])
    return np.array([(i * (m - 1)) // (size - 1) for i in range(size)], dtype=int)


def _gp_posterior_std(x_train, y_train, x_query, lengthscale, noise):
    def k(a, b):
        return np.exp(-0.5 * ((a[:, None] - b[None, :]) / lengthscale) ** 2)

    kt = k(x_train, x_train) + (noise**2 + 1e-12) * np.eye(x_train.size)
    chol = np.linalg.cholesky(kt)
    ks = k(x_train, x_query)
    v = np.linalg.solve(chol, ks)
    var = 1.0 - np.sum(v**2, axis=0)
    return np.sqrt(np.clip(var, 0.0, None))


def sample_training_set(dataset: Dataset, plan: SamplingPlan, replicate: int) -> np.ndarray:
    """Sorted training indices, deterministic in (plan.seed, replicate)."""
    if plan.size > dataset.m:
        raise ValueError(f"requested {plan.size} points from a grid of {dataset.m}")
    rng = np.random.default_rng(np.random.SeedSequence(plan.seed, spawn_key=(replicate,)))
    if plan.strategy == "equal":
        return equal_indices(dataset.m, plan.size)
    if plan.strategy == "random":
        return np.sort(rng.choice(dataset.m, size=plan.size, replace=False))

    # bo: one random point per dissociation region, then GP uncertainty sampling.
    r = dataset.r
    c1, c2 = region_bounds(r)
    regions = [np.flatnonzero(r < c1), np.flatnonzero((r >= c1) & (r < c2)),
               np.flatnonzero(r >= c2)]
    chosen = [int(rng.choice(reg)) for reg in regions if reg.size]
    x, y = dataset.r_scaled, dataset.y_scaled
    while len(chosen) < plan.size:
        pool = np.setdiff1d(np.arange(dataset.m), chosen)
        std = _gp_posterior_std(x[np.asarray(chosen)], y[np.asarray(chosen)], x[pool],
                                plan.bo_lengthscale, plan.bo_noise)
        chosen.append(int(pool[np.argmax(std)]))
    return np.sort(np.asarray(chosen))


@dataclass
class RunRecord:
    molecule: str
    target: str                  # e.g. 'transition_energy:T2'
    model: str
    size: int
    replicate: int
    seed: int
    train_mse: float             # physical units squared
    test_mse: float
    wall_time: float
    stop_reason: str
    train_indices: tuple[int, ...] = ()
    error: str | None = None

    def to_row(self) -> list:
        return [self.molecule, self.target, self.model, self.size, self.replicate,
                self.seed, repr(self.train_mse), repr(self.test_mse),
                f"{self.wall_time:.3f}", self.stop_reason,
                " ".join(map(str, self.train_indices)), self.error or ""]

    CSV_HEADER = ["molecule", "target", "model", "size", "replicate", "seed",
                  "train_mse", "test_mse", "wall_time", "stop_reason",
                  "train_indices", "error"]


def _mse_physical(pred_scaled, y_scaled, half_range) -> float:
    return float(np.mean((pred_scaled - y_scaled) ** 2)) * half_range**2


@dataclass
class BenchConfig:
    sizes: tuple[int, ...] = DEFAULT_SIZES
    replicates: int = DEFAULT_REPLICATES
    strategy: str = "bo"
    master_seed: int = 2024
    pretrain_policy: StopPolicy = field(default_factory=lambda: StopPolicy(max_iters=1000))
    e2e_policy: StopPolicy = field(default_factory=lambda: StopPolicy(max_iters=2000))
    nn_policy: StopPolicy = field(default_factory=lambda: StopPolicy(max_iters=1000))
    pretrain_lr: float = 0.5
    e2e_lr: float = 0.02


def run_cell(dataset: Dataset, template, basis, models: list[str], size: int,
             replicate: int, config: BenchConfig) -> list[RunRecord]:
    """Train every requested model on one replicate's training set.

    siqnn and siqnn-nn share the pre-training stage; individual model failures
    are recorded and do not abort the cell.
    """
    cell_key = zlib.crc32(f"{dataset.molecule}:{dataset.kind}:{dataset.label}".encode())
    seq = np.random.SeedSequence(config.master_seed,
                                 spawn_key=(cell_key, size, replicate))
    sample_seed, train_seed = [int(s) for s in seq.generate_state(2)]
    plan = SamplingPlan(size=size, strategy=config.strategy, seed=sample_seed)
    train_idx = sample_training_set(dataset, plan, replicate)
    test_idx = np.setdiff1d(np.arange(dataset.m), train_idx)
    half = dataset.scaling.y_half_range
    target = f"{dataset.kind}:{dataset.label}"
    y_s = dataset.y_scaled
    records: list[RunRecord] = []

    def record(model_name, train_mse, test_mse, wall, stop, err=None):
        records.append(RunRecord(
            molecule=dataset.molecule, target=target, model=model_name, size=size,
            replicate=replicate, seed=train_seed, train_mse=train_mse, test_mse=test_mse,
            wall_time=wall, stop_reason=stop, train_indices=tuple(int(i) for i in train_idx),
            error=err,
        ))

    want_quantum = [m for m in models if m in QUANTUM_MODELS]
    if want_quantum:
        t0 = time.perf_counter()
        try:
            pre_model, pre_res = pretrain_siqnn(
                template, basis, dataset, train_idx, policy=config.pretrain_policy,
                lr=config.pretrain_lr, seed=train_seed,
            )
            pre_wall = time.perf_counter() - t0
            if "siqnn" in want_quantum:
                pred = pre_model.forward(dataset.states[test_idx], dataset.r_scaled[test_idx])
                record("siqnn", pre_res.best_loss_physical,
                       _mse_physical(pred, y_s[test_idx], half), pre_wall,
                       pre_res.stop_reason)
            if "siqnn-nn" in want_quantum:
                t1 = time.perf_counter()
                model, res = train_end_to_end(
                    pre_model, dataset, train_idx, policy=config.e2e_policy,
                    lr=config.e2e_lr, seed=train_seed + 1,
                )
                pred = model.forward(dataset.states[test_idx], dataset.r_scaled[test_idx])
                record("siqnn-nn", res.best_loss_physical,
                       _mse_physical(pred, y_s[test_idx], half),
                       pre_wall + time.perf_counter() - t1, res.stop_reason)
        except (TrainingDiverged, ValueError) as exc:
            for name in want_quantum:
                record(name, np.nan, np.nan, time.perf_counter() - t0, "error", str(exc))

    x_train, y_train = dataset.r_scaled[train_idx], y_s[train_idx]
    x_test = dataset.r_scaled[test_idx]
    if "nn" in models:
        t0 = time.perf_counter()
        budget = quantum_param_total(template, len(basis.terms))
        try:
            nn = nn_fit(x_train, y_train, param_budget=budget, policy=config.nn_policy,
                        seed=train_seed)
            record("nn", _mse_physical(nn.predict(x_train), y_train, half),
                   _mse_physical(nn.predict(x_test), y_s[test_idx], half),
                   time.perf_counter() - t0, nn.stop_reason)
        except RuntimeError as exc:
            record("nn", np.nan, np.nan, time.perf_counter() - t0, "error", str(exc))
    if "gpr" in models:
        t0 = time.perf_counter()
        try:
            gpr = gpr_fit(x_train, y_train)
            record("gpr", _mse_physical(gpr.predict(x_train), y_train, half),
                   _mse_physical(gpr.predict(x_test), y_s[test_idx], half),
                   time.perf_counter() - t0, "converged")
        except np.linalg.LinAlgError as exc:
            record("gpr", np.nan, np.nan, time.perf_counter() - t0, "error", str(exc))
    if "svr" in models:
        t0 = time.perf_counter()
        try:
            svr = svr_fit(x_train, y_train)
            record("svr", _mse_physical(svr.predict(x_train), y_train, half),
                   _mse_physical(svr.predict(x_test), y_s[test_idx], half),
                   time.perf_counter() - t0, "converged")
        except RuntimeError as exc:
            record("svr", np.nan, np.nan, time.perf_counter() - t0, "error", str(exc))
    return records


def run_matrix(datasets: list[Dataset], template, basis, models: list[str],
               config: BenchConfig, n_workers: int = 1,
               progress=None) -> list[RunRecord]:
    """All (dataset, size, replicate) cells, optionally across processes."""
    cells = [(d, size, rep) for d in datasets for size in config.sizes
             for rep in range(config.replicates)]
    records: list[RunRecord] = []
    if n_workers <= 1:
        for i, (d, size, rep) in enumerate(cells):
            records.extend(run_cell(d, template, basis, models, size, rep, config))
            if progress:
                progress(i + 1, len(cells))
        return records

    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(run_cell, d, template, basis, models, size, rep, config)
                   for d, size, rep in cells]
        for i, fut in enumerate(futures):
            records.extend(fut.result())
            if progress:
                progress(i + 1, len(cells))
    return records


# ---------------------------------------------------------------------------
# aggregation


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ascending ranks starting at 1; ties share the average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] <= values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def aggregate_boxplot(records: list[RunRecord]) -> list[dict]:
    """Median/quartile/1.5-IQR-whisker stats per (molecule, target, model, size)."""
    groups: dict[tuple, list[float]] = {}
    for rec in records:
        if rec.error:
            continue
        groups.setdefault((rec.molecule, rec.target, rec.model, rec.size), []).append(rec.test_mse)
    if not groups:
        raise ValueError("no successful records to aggregate")
    rows = []
    for (molecule, target, model, size), vals in sorted(groups.items()):
        v = np.asarray(vals)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = v[(v >= lo_fence) & (v <= hi_fence)]
        rows.append({
            "molecule": molecule, "target": target, "model": model, "size": size,
            "n": int(v.size), "median": float(med), "q1": float(q1), "q3": float(q3),
            "whisker_lo": float(inside.min()), "whisker_hi": float(inside.max()),
            "outliers": [float(x) for x in v[(v < lo_fence) | (v > hi_fence)]],
        })
    return rows


def aggregate_ranking(records: list[RunRecord]) -> list[dict]:
    """Mean rank +- SEM per (model, size), ranked within (target, replicate)."""
    by_cell: dict[tuple, dict[str, float]] = {}
    for rec in records:
        if rec.error:
            continue
        by_cell.setdefault((rec.molecule, rec.target, rec.size, rec.replicate), {})[
            rec.model] = rec.test_mse
    per_model: dict[tuple[str, int], list[float]] = {}
    for (molecule, target, size, rep), scores in by_cell.items():
        models = sorted(scores)
        ranks = _average_ranks(np.asarray([scores[m] for m in models]))
        for m, rank in zip(models, ranks):
            per_model.setdefault((m, size), []).append(float(rank))
    rows = []
    for (model, size), ranks in sorted(per_model.items()):
        arr = np.asarray(ranks)
        sem = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
        rows.append({"model": model, "size": size, "mean_rank": float(arr.mean()),
                     "sem": sem, "n": int(arr.size)})
    return rows


def records_to_csv(records: list[RunRecord], path: str | Path, meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh)
        writer.writerow(RunRecord.CSV_HEADER)
        for rec in records:
            writer.writerow(rec.to_row())


def records_to_json(records: list[RunRecord], path: str | Path, meta: dict | None = None) -> None:
    doc = {"meta": meta or {}, "records": [rec.__dict__ for rec in records]}
    Path(path).write_text(json.dumps(doc, indent=1, default=list))


def load_records_csv(path: str | Path) -> list[RunRecord]:
    records = []
    with open(path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(rows)
    for row in reader:
        records.append(RunRecord(
            molecule=row["molecule"], target=row["target"], model=row["model"],
            size=int(row["size"]), replicate=int(row["replicate"]), seed=int(row["seed"]),
            train_mse=float(row["train_mse"]), test_mse=float(row["test_mse"]),
            wall_time=float(row["wall_time"]), stop_reason=row["stop_reason"],
            train_indices=tuple(int(i) for i in row["train_indices"].split() if i),
            error=row["error"] or None,
        ))
    return records


# ---------------------------------------------------------------------------
# shot-noise study


def _rotate_to_z_basis(amps: np.ndarray, string) -> np.ndarray:
    """Apply the local basis change that maps a Pauli string to Z-type."""
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    s_dag = np.diag([1.0, -1.0j])
    out = amps
    for q, op in enumerate(string.ops):
        if op == 1:      # X -> H
            out = _apply_1q(out, h, q)
        elif op == 2:    # Y -> H S^dag
            out = _apply_1q(out, h @ s_dag, q)
    return out


def _apply_1q(amps: np.ndarray, mat2: np.ndarray, q: int) -> np.ndarray:
    n = amps.shape[-1].bit_length() - 1
    a = amps.reshape((2,) * n)
    ax = n - 1 - q
    a = np.moveaxis(a, ax, -1)
    shape = a.shape
    a = a.reshape(-1, 2) @ mat2.T
    return np.moveaxis(a.reshape(shape), -1, ax).reshape(-1)


def measure_pauli_sum(state: np.ndarray, op: PauliSum, total_shots: int, seed: int,
                      mode: str) -> float:
    """Estimate <op> by simulated measurement.

    mode='per-term': every non-identity string gets the full budget (the
    paper's unreachable upper bound); mode='qwc': the budget is split evenly
    across qubit-wise-commuting groups measured one setting each.
    """
    rng = np.random.default_rng(seed)
    groups = qwc_group(op)
    if mode == "per-term":
        groups = [[term] for g in groups for term in g]
        budgets = [total_shots] * len(groups)
    elif mode == "qwc":
        n_groups = sum(1 for g in groups
                       if any(s.weight > 0 for s, _ in g))
        budgets = [max(1, total_shots // max(1, n_groups))] * len(groups)
    else:
        raise ValueError(f"unknown measurement mode {mode!r}")

    total = 0.0
    for group, budget in zip(groups, budgets):
        live = [(s, c) for s, c in group if s.weight > 0]
        for s, c in group:
            if s.weight == 0:
                total += c.real  # identity measured exactly
        if not live:
            continue
        # One basis rotation serves the whole qwc group.
        merged_x = 0
        rep_ops = bytearray(live[0][0].n_qubits)
        for s, _ in live:
            for q, o in enumerate(s.ops):
                if o != 0:
                    rep_ops[q] = o
            merged_x |= s.x_mask
        from .paulis import PauliString

        rep = PauliString(bytes(rep_ops))
        rotated = _rotate_to_z_basis(state, rep)
        probs = np.abs(rotated) ** 2
        probs = probs / probs.sum()
        hist = rng.multinomial(budget, probs)
        idx = np.arange(probs.size)
        for s, c in live:
            mask = s.x_mask | s.z_mask  # measured qubits of this string
            par = np.bitwise_count(np.bitwise_and(idx, mask)).astype(np.int64)
            eig = np.where(par & 1, -1.0, 1.0)
            total += c.real * float(np.dot(eig, hist)) / budget
    return total


def train_with_shots(template, basis, dataset: Dataset, train_idx: np.ndarray,
                     n_shots: int, seed: int, pre_policy: StopPolicy,
                     e2e_policy: StopPolicy, pretrain_lr: float = 0.5,
                     e2e_lr: float = 0.02) -> HybridModel:
    """Two-stage training with shot-sampled model outputs.

    Residuals come from sampled evaluations with the given per-evaluation shot
    budget; the parameter direction d<O>/dtheta uses the exact adjoint sweep
    (the shot noise enters the update through the residuals).
    """
    from .model import DirectWeights, mlp_init
    from .training import THETA_INIT_SCALE, AdamState, adam_step

    rng = np.random.default_rng(seed)
    states, r_s, y_s = dataset.states[train_idx], dataset.r_scaled[train_idx], \
        dataset.y_scaled[train_idx]
    half2 = dataset.scaling.y_half_range**2

    def noisy_loop(model, policy, lr):
        params = model.pack()
        adam = AdamState(lr=lr)
        best, best_params = np.inf, params.copy()
        since = 0
        for _ in range(policy.max_iters):
            model.unpack(params)
            pred = np.array([
                model.forward_shots(states[b], float(r_s[b]), n_shots,
                                    int(rng.integers(2**31)))
                for b in range(len(train_idx))
            ])
            resid = pred - y_s
            loss = float(np.mean(resid**2))
            if loss < best * (1 - policy.min_rel_improvement):
                since = 0
            else:
                since += 1
            if loss < best:
                best, best_params = loss, params.copy()
            if loss * half2 <= policy.target_loss or since >= policy.patience:
                break
            d_theta, d_head = model.backward(states, r_s, (2.0 / resid.size) * resid)
            params = adam_step(adam, params, np.concatenate([d_theta, d_head]))
        model.unpack(best_params)
        return model

    theta0 = np.random.default_rng(seed).uniform(-THETA_INIT_SCALE, THETA_INIT_SCALE,
                                                 template.param_count)
    w0 = np.zeros(len(basis.terms))
    w0[0] = float(np.mean(y_s))
    pre = HybridModel(template, theta=theta0, head=DirectWeights(w0), basis=basis,
                      scaling=dataset.scaling.to_dict())
    pre = noisy_loop(pre, pre_policy, pretrain_lr)
    e2e = HybridModel(template, theta=pre.theta.copy(),
                      head=mlp_init(len(basis.terms), seed=seed + 1), basis=basis,
                      scaling=dataset.scaling.to_dict())
    return noisy_loop(e2e, e2e_policy, e2e_lr)


def shot_eval_mse(model: HybridModel, dataset: Dataset, eval_idx: np.ndarray,
                  n_shots: int | None, seed: int) -> float:
    """Test MSE (physical units) with shot-sampled or exact model evaluations."""
    half2 = dataset.scaling.y_half_range**2
    rng = np.random.default_rng(seed)
    errs = []
    for b in eval_idx:
        if n_shots is None:
            y_hat = model.forward(dataset.states[b], float(dataset.r_scaled[b]))
        else:
            y_hat = model.forward_shots(dataset.states[b], float(dataset.r_scaled[b]),
                                        n_shots, int(rng.integers(2**31)))
        errs.append((y_hat - dataset.y_scaled[b]) ** 2)
    return float(np.mean(errs)) * half2


def hamiltonian_measurement_mse(states: np.ndarray, hamiltonian: PauliSum,
                                n_shots: int, seed: int, mode: str) -> float:
    """MSE of sampled ground-state energies against exact expectations."""
    from .simulator import StateVector, expectation

    rng = np.random.default_rng(seed)
    errs = []
    for b in range(states.shape[0]):
        exact = expectation(StateVector(states[b]), hamiltonian)
        est = measure_pauli_sum(states[b], hamiltonian, n_shots,
                                int(rng.integers(2**31)), mode)
        errs.append((est - exact) ** 2)
    return float(np.mean(errs))
