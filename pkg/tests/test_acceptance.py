"""Acceptance suite: one test per criterion, printed pass/fail lines.

Criteria 1-7 and 11 run on every invocation; 8-10 are replicated-benchmark
runs marked `slow` (hours-scale ceilings, minutes in practice here). All use
the committed fixture bundles and synthetic operators only.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from siqnn.ansatz import build_observable_basis, build_siqnn, param_count_formula
from siqnn.baselines import gpr_fit, nn_fit, svr_fit_single
from siqnn.bench import (
    BenchConfig,
    aggregate_boxplot,
    aggregate_ranking,
    hamiltonian_measurement_mse,
    run_cell,
    run_matrix,
    sample_training_set,
    SamplingPlan,
    shot_eval_mse,
)
from siqnn.bench import equal_indices
from siqnn.fermions import build_qubit_hamiltonian
from siqnn.integrals import Bundle
from siqnn.paulis import qwc_group
from siqnn.simulator import (
    StateVector,
    apply_circuit,
    estimate_z_observable,
    gradient,
    sample_z_basis,
)
from siqnn.spectra import ScanSpectra, diagonalize
from siqnn.training import StopPolicy, pretrain_siqnn, train_end_to_end

from oracles import central_difference, dense_circuit_unitary, dense_fermionic_hamiltonian, random_integrals

BUNDLES = Path(__file__).resolve().parents[1] / "data" / "bundles"

_bundle_cache: dict = {}


def load_scan(name: str) -> ScanSpectra:
    if name not in _bundle_cache:
        _bundle_cache[name] = ScanSpectra(Bundle.load(BUNDLES / name))
    return _bundle_cache[name]


def report(criterion: int, detail: str):
    print(f"\nPASS criterion {criterion}: {detail}")


def test_criterion_01_parameter_counts():
    t0 = time.perf_counter()
    counts = {n: build_siqnn(n).param_count for n in (2, 4, 5, 8)}
    assert counts[4] == 21 == param_count_formula(4)
    assert counts[2] == 5 == param_count_formula(2)
    assert counts[8] == 53 == param_count_formula(8)
    assert counts[5] == 35
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(1, f"counts {counts} in {elapsed:.3f}s")


def test_criterion_02_jw_occupation_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for n_orb, seed in ((1, 11), (2, 12), (3, 13)):
        ints = random_integrals(n_orb, seed)
        dev = np.max(np.abs(build_qubit_hamiltonian(ints).to_dense()
                            - dense_fermionic_hamiltonian(ints)))
        worst = max(worst, float(dev))
        assert dev < 1e-10
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(2, f"max deviation {worst:.2e} over 1-3 orbitals in {elapsed:.1f}s")


def test_criterion_03_simulator_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(21)
    # Dense unitary equivalence up to 6 qubits on random N/P circuits.
    worst_state = 0.0
    for n in (2, 3, 4, 5, 6):
        template = build_siqnn(max(2, n // 2)) if n % 2 == 0 else None
        from siqnn.simulator import GateInstruction

        gates = []
        slot = 0
        for _ in range(4):
            q1, q2 = rng.choice(n, size=2, replace=False)
            kind = "N" if rng.random() < 0.5 else "P"
            width = 3 if kind == "N" else 2
            gates.append(GateInstruction(kind, (int(q1), int(q2)),
                                         tuple(range(slot, slot + width))))
            slot += width
        params = rng.uniform(-2, 2, slot)
        amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        amps /= np.linalg.norm(amps)
        out = apply_circuit(amps.copy(), gates, params)
        oracle = dense_circuit_unitary(gates, params, n) @ amps
        worst_state = max(worst_state, float(np.max(np.abs(out - oracle))))
        assert worst_state < 1e-10
        del template
    # Gradient vs central finite differences on the n_orb=4 template.
    template = build_siqnn(4)
    basis = build_observable_basis(template)
    obs = basis.terms[1] + basis.terms[3] * 0.6 + basis.terms[7] * (-0.3)
    amps = rng.normal(size=1 << 8) + 1j * rng.normal(size=1 << 8)
    amps /= np.linalg.norm(amps)
    state = StateVector(amps)
    obs_dense_diag = None
    worst_rel = 0.0
    gates = list(template.gates)
    for _ in range(20):
        params = rng.uniform(-1.5, 1.5, template.param_count)

        def f(p):
            out = apply_circuit(amps.copy(), gates, p)
            from siqnn.simulator import apply_pauli_sum

            return float(np.vdot(out, apply_pauli_sum(out, obs)).real)

        g = gradient(gates, params, state, obs)
        fd = central_difference(f, params)
        rel = np.max(np.abs(g - fd)) / max(1e-12, np.max(np.abs(fd)))
        worst_rel = max(worst_rel, float(rel))
        assert rel < 1e-5
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    del obs_dense_diag
    report(3, f"state dev {worst_state:.2e}, FD rel {worst_rel:.2e}, {elapsed:.1f}s")


def test_criterion_04_sector_diagonalization_h2():
    t0 = time.perf_counter()
    bundle = Bundle.load(BUNDLES / "h2.json")
    assert len(bundle.records) == 100
    worst_match = 0.0
    worst_res = 0.0
    for rec in bundle.records:
        h = build_qubit_hamiltonian(rec)
        sp = diagonalize(h, rec.n_elec, 0.0, r=rec.r)
        full = np.linalg.eigvalsh(h.to_dense())
        for e in sp.energies:
            worst_match = max(worst_match, float(np.min(np.abs(full - e))))
        worst_res = max(worst_res, sp.max_residual)
        assert worst_match < 1e-8
        assert worst_res < 1e-8
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    report(4, f"100 geometries: sector-vs-dense {worst_match:.2e}, "
              f"residual {worst_res:.2e}, {elapsed:.0f}s")


def test_criterion_05_shot_estimator():
    t0 = time.perf_counter()
    rng = np.random.default_rng(31)
    amps = rng.normal(size=16) + 1j * rng.normal(size=16)
    st = StateVector(amps / np.linalg.norm(amps))
    template = build_siqnn(2)
    basis = build_observable_basis(template)
    obs = basis.terms[1] + 0.5 * basis.terms[2] + (-0.7) * basis.terms[4]
    from siqnn.simulator import expectation

    exact = expectation(st, obs)
    variances = []
    for n_shots in (10**3, 10**4, 10**5):
        vals = np.array([estimate_z_observable(sample_z_basis(st, n_shots, seed=5000 + r), obs)
                         for r in range(1000)])
        sem = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - exact) < 3 * sem + 1e-12
        variances.append(vals.var(ddof=1))
    slope = float(np.polyfit(np.log10([1e3, 1e4, 1e5]), np.log10(variances), 1)[0])
    assert abs(slope + 1.0) < 0.1
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    report(5, f"unbiased at 3 sigma over 1000 seeds, slope {slope:.3f}, {elapsed:.0f}s")


def test_criterion_06_qwc_grouping_lih():
    t0 = time.perf_counter()
    bundle = Bundle.load(BUNDLES / "lih.json")
    h = build_qubit_hamiltonian(bundle.records[len(bundle.records) // 2])
    n_strings = len(h)
    groups = qwc_group(h)
    for group in groups:
        for a, _ in group:
            for b, _ in group:
                assert a.qwc(b)
    covered = sorted(s.ops for g in groups for s, _ in g)
    assert covered == sorted(s.ops for s in h.terms)
    # String count is a property of the committed fixture (paper reference 276).
    assert n_strings == 276
    assert len(groups) <= 70
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(6, f"{n_strings} strings -> {len(groups)} qwc groups, {elapsed:.1f}s")


def test_criterion_07_training_smoke_h2():
    t0 = time.perf_counter()
    scan = load_scan("h2.json")
    ds = scan.dataset("transition_energy", "T1")
    template = build_siqnn(4)
    basis = build_observable_basis(template)
    train_idx = equal_indices(ds.m, 6)
    best = np.inf
    for seed in range(5):
        pre_m, pre_r = pretrain_siqnn(template, basis, ds, train_idx,
                                      policy=StopPolicy(max_iters=1000), lr=0.5, seed=seed)
        _, res = train_end_to_end(pre_m, ds, train_idx,
                                  policy=StopPolicy(max_iters=2000), lr=0.02, seed=seed + 100)
        best = min(best, res.best_loss_physical, pre_r.best_loss_physical)
        if best <= 1e-5:
            break
    assert best <= 1e-5
    elapsed = time.perf_counter() - t0
    assert elapsed < 600.0
    report(7, f"best train loss {best:.2e} Ha^2 within caps, {elapsed:.0f}s")


def _lih_t2_dataset():
    return load_scan("lih.json").dataset("transition_energy", "T2")


@pytest.mark.slow
def test_criterion_08_lih_t2_margin():
    t0 = time.perf_counter()
    ds = _lih_t2_dataset()
    template = build_siqnn(5)
    basis = build_observable_basis(template)
    config = BenchConfig(sizes=(4,), replicates=10, strategy="bo", master_seed=2024)
    records = run_matrix([ds], template, basis,
                         ["siqnn-nn", "nn", "gpr", "svr"], config)
    med = {r["model"]: r["median"] for r in aggregate_boxplot(records)}
    for baseline in ("nn", "gpr", "svr"):
        assert med["siqnn-nn"] < med[baseline], f"siqnn-nn lost to {baseline}"
        assert med[baseline] / med["siqnn-nn"] >= 10.0, (
            f"gap vs {baseline} only {med[baseline] / med['siqnn-nn']:.1f}x")
    gaps = {b: med[b] / med["siqnn-nn"] for b in ("nn", "gpr", "svr")}
    report(8, f"median {med['siqnn-nn']:.2e} Ha^2; gaps {gaps} "
              f"({(time.perf_counter() - t0) / 60:.0f} min)")


@pytest.mark.slow
def test_criterion_09_lih_ranking():
    t0 = time.perf_counter()
    scan = load_scan("lih.json")
    datasets = [scan.dataset(kind, label) for kind, label in scan.available_targets()]
    template = build_siqnn(5)
    basis = build_observable_basis(template)
    config = BenchConfig(sizes=(6, 7, 8), replicates=10, strategy="bo", master_seed=2024)
    records = run_matrix(datasets, template, basis,
                         ["siqnn", "siqnn-nn", "nn", "gpr", "svr"], config, n_workers=2)
    rows = aggregate_ranking(records)
    by = {(r["model"], r["size"]): r["mean_rank"] for r in rows}
    for size in (6, 7, 8):
        ranks = {m: by[(m, size)] for m in ("siqnn", "siqnn-nn", "nn", "gpr", "svr")}
        best = min(ranks, key=ranks.get)
        assert best == "siqnn-nn", f"L={size}: best rank is {best} ({ranks})"
    report(9, f"siqnn-nn best mean rank at L=6,7,8 over {len(datasets)} targets "
              f"({(time.perf_counter() - t0) / 60:.0f} min)")


@pytest.mark.slow
def test_criterion_10_shot_study_direction():
    t0 = time.perf_counter()
    ds = _lih_t2_dataset()
    template = build_siqnn(5)
    basis = build_observable_basis(template)
    # The reference checkpoint reproduces the criterion-8 setting: the best
    # replicate of LiH dE_T2 at L=4 under the same seeds.
    config = BenchConfig(sizes=(4,), replicates=10, strategy="bo", master_seed=2024)
    best = None
    for rep in range(config.replicates):
        recs = run_cell(ds, template, basis, ["siqnn-nn"], 4, rep, config)
        if best is None or recs[0].test_mse < best[0].test_mse:
            best = recs
    rec = best[0]
    cell_seed = rec.seed
    train_idx = np.asarray(rec.train_indices)
    pre_m, _ = pretrain_siqnn(template, basis, ds, train_idx,
                              policy=config.pretrain_policy, lr=0.5, seed=cell_seed)
    model, _ = train_end_to_end(pre_m, ds, train_idx, policy=config.e2e_policy,
                                lr=0.02, seed=cell_seed + 1)
    test_idx = np.setdiff1d(np.arange(ds.m), train_idx)

    bundle = Bundle.load(BUNDLES / "lih.json")
    sub = test_idx[:: max(1, test_idx.size // 8)][:8]
    hams = [build_qubit_hamiltonian(bundle.records[i]) for i in sub]
    states = ds.states[sub]

    budgets = (3_000, 30_000)
    for budget in budgets:
        model_mse = float(np.mean([shot_eval_mse(model, ds, test_idx, budget, seed=7 + s)
                                   for s in range(5)]))
        qwc_mse = float(np.mean([
            hamiltonian_measurement_mse(states[k:k + 1], h, budget, 97 + 13 * k + s, "qwc")
            for s in range(3) for k, h in enumerate(hams)
        ]))
        upper_mse = float(np.mean([
            hamiltonian_measurement_mse(states[k:k + 1], h, budget, 211 + 17 * k + s,
                                        "per-term")
            for s in range(3) for k, h in enumerate(hams)
        ]))
        assert qwc_mse >= upper_mse, "qwc beat the per-term upper bound"
        if budget == 30_000:
            assert model_mse * 10.0 <= qwc_mse, (
                f"model {model_mse:.2e} not 10x below qwc {qwc_mse:.2e} at 3e4 shots")
            detail = (f"model {model_mse:.2e} vs qwc {qwc_mse:.2e} vs upper "
                      f"{upper_mse:.2e} at 3e4 shots")
    report(10, detail + f" ({(time.perf_counter() - t0) / 60:.0f} min)")


def test_criterion_11_baseline_sanity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(41)
    r = np.sort(rng.uniform(-1, 1, 9))
    y = np.sin(2.2 * r)
    gpr = gpr_fit(r, y, noises=(1e-8,))
    interp = float(np.max(np.abs(gpr.predict(r) - y)))
    assert interp < 1e-8
    svr = svr_fit_single(r, y, c=100.0, epsilon=1e-3, gamma=1.0)
    assert svr.kkt_residual < 1e-6
    lin_r = np.linspace(-1, 1, 12)
    lin_y = 0.6 * lin_r - 0.2
    nn = nn_fit(lin_r, lin_y, param_budget=10, learning_rates=(0.01,),
                policy=StopPolicy(target_loss=5e-9, max_iters=250000, patience=250000,
                                  min_rel_improvement=1e-7))
    assert nn.train_loss < 1e-8
    report(11, f"GPR interp {interp:.1e}, SVR KKT {svr.kkt_residual:.1e}, "
               f"NN linear {nn.train_loss:.1e} ({time.perf_counter() - t0:.0f}s)")
