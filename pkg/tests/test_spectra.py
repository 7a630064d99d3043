"""Sector diagonalization, tracking, targets, scaling."""

import numpy as np
import pytest

from siqnn.fermions import build_qubit_hamiltonian
from siqnn.integrals import ActiveSpaceIntegrals
from siqnn.paulis import PauliString, PauliSum
from siqnn.spectra import (
    Dataset,
    GeometrySpectrum,
    Scaling,
    TrackingError,
    classify_state,
    diagonalize,
    fix_phase,
    sector_basis,
    tdm_norm,
    track_states,
    transition_energy,
)

from oracles import random_integrals


def one_orbital_ints(eps):
    return ActiveSpaceIntegrals(
        n_orb=1, n_elec=1, e_core=0.0, h1=np.array([[eps]]),
        h2=np.zeros((1, 1, 1, 1)), dipole1=np.zeros((3, 1, 1)),
        nuclear_dipole=np.zeros(3), r=1.0,
    )


def test_unrestricted_single_qubit():
    h = PauliSum(1)
    h.add_term(PauliString.from_label("Z"), 1.0)
    sp = diagonalize(h, n_elec=None)
    assert np.allclose(sp.energies, [-1.0, 1.0])


def test_one_orbital_sector_energies():
    eps = 0.37
    h = build_qubit_hamiltonian(one_orbital_ints(eps))
    assert np.allclose(diagonalize(h, 0, 0.0).energies, [0.0])
    assert np.allclose(diagonalize(h, 1, 0.5).energies, [eps])
    assert np.allclose(diagonalize(h, 1, -0.5).energies, [eps])
    assert np.allclose(diagonalize(h, 2, 0.0).energies, [2 * eps])


def test_sector_subset_of_full_spectrum():
    ints = random_integrals(4, 12)  # 8 qubits
    h = build_qubit_hamiltonian(ints)
    sp = diagonalize(h, n_elec=2, sz_sector=0.0)
    full = np.linalg.eigvalsh(h.to_dense())
    for e in sp.energies:
        assert np.min(np.abs(full - e)) < 1e-8
    assert sp.max_residual < 1e-8


def test_sector_union_equals_full_spectrum():
    ints = random_integrals(2, 13)  # 4 qubits
    h = build_qubit_hamiltonian(ints)
    collected = []
    for n_alpha in range(3):
        for n_beta in range(3):
            sz = (n_alpha - n_beta) / 2
            sp = diagonalize(h, n_alpha + n_beta, sz)
            collected.extend(sp.energies)
    full = np.sort(np.linalg.eigvalsh(h.to_dense()))
    assert np.allclose(np.sort(collected), full, atol=1e-8)


def test_sector_basis_counts():
    assert sector_basis(4, 1, 1).size == 16
    assert sector_basis(5, 2, 2).size == 100
    mask = (1 << 5) - 1
    for k in sector_basis(5, 2, 2):
        assert bin(int(k) & mask).count("1") == 2
        assert bin(int(k) >> 5).count("1") == 2


def test_number_expectation_matches_sector():
    ints = random_integrals(2, 14)
    h = build_qubit_hamiltonian(ints)
    sp = diagonalize(h, 2, 0.0)
    assert np.all(sp.number_expectations() == 2.0)


def test_classify_state():
    assert classify_state(0.004) == "singlet"
    assert classify_state(1.93) == "triplet"
    assert classify_state(6.0) == "other"
    assert classify_state(0.75) == "other"


def test_spin_labels_on_physical_spectrum():
    ints = random_integrals(2, 15)
    sp = diagonalize(build_qubit_hamiltonian(ints), 2, 0.0)
    labels = {classify_state(v) for v in sp.s2}
    assert labels <= {"singlet", "triplet"}
    assert "singlet" in labels and "triplet" in labels


def _toy_spectrum(r, energies, vectors):
    energies = np.asarray(energies, dtype=float)
    vectors = np.asarray(vectors, dtype=complex)
    return GeometrySpectrum(
        r=r, n_qubits=2, sector_indices=np.arange(vectors.shape[0]),
        energies=energies, vectors=vectors, s2=np.zeros(energies.size),
        n_elec=1, max_residual=0.0,
    )


def test_tracking_identity_for_constant_hamiltonian():
    h = np.diag([0.0, 0.5, 1.0])
    e, v = np.linalg.eigh(h)
    spectra = [_toy_spectrum(r, e, v) for r in np.linspace(0, 1, 5)]
    tracked = track_states(spectra)
    assert not tracked.flags
    assert np.allclose(tracked.energies, np.tile(e[:, None], (1, 5)))


def test_tracking_flags_sharp_avoided_crossing():
    # 2-level model [[r, g], [g, -r]]: tiny gap -> eigenvectors rotate fast.
    g = 1e-3
    grid = np.linspace(-0.5, 0.5, 21)
    spectra = []
    for r in grid:
        e, v = np.linalg.eigh(np.array([[r, g], [g, -r]]))
        spectra.append(_toy_spectrum(r, e, v))
    tracked = track_states(spectra)
    assert tracked.flags, "crossing region should be flagged"
    assert tracked.min_overlap.min() < 0.8


def test_tracking_smooth_avoided_crossing_unflagged():
    g = 0.3
    grid = np.linspace(-0.5, 0.5, 21)
    spectra = []
    for r in grid:
        e, v = np.linalg.eigh(np.array([[r, g], [g, -r]]))
        spectra.append(_toy_spectrum(r, e, v))
    tracked = track_states(spectra)
    assert not tracked.flags


def test_tracking_error_on_hopeless_grid():
    # Fourier basis: every overlap with the previous basis is 1/3 < 0.5.
    dft = np.exp(2j * np.pi * np.outer(np.arange(3), np.arange(3)) / 3) / np.sqrt(3)
    sp1 = _toy_spectrum(0.0, [0.0, 1.0, 2.0], np.eye(3))
    sp2 = _toy_spectrum(1.0, [0.0, 1.0, 2.0], dft)
    with pytest.raises(TrackingError):
        track_states([sp1, sp2])


def test_tracking_degenerate_block_remix_invariance():
    rng = np.random.default_rng(3)
    base = np.linalg.qr(rng.normal(size=(4, 4)))[0]
    energies2 = np.array([0.0, 1.0, 1.0, 2.0])  # degenerate middle block

    def make(remix):
        v = base.copy()
        if remix is not None:
            v[:, 1:3] = v[:, 1:3] @ remix
        return _toy_spectrum(1.0, energies2, v)

    sp0 = _toy_spectrum(0.0, np.array([0.0, 0.9, 1.1, 2.0]), np.eye(4))
    angle = 0.77
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    t_plain = track_states([sp0, make(None)])
    t_remix = track_states([sp0, make(rot)])
    assert np.allclose(t_plain.energies, t_remix.energies, atol=1e-12)
    # Tracked vectors agree up to phase (projection is basis-free).
    for j in range(4):
        a = fix_phase(t_plain.vectors[1][:, j])
        b = fix_phase(t_remix.vectors[1][:, j])
        assert np.max(np.abs(a - b)) < 1e-10


def test_transition_energy():
    ints = random_integrals(2, 16)
    sp = diagonalize(build_qubit_hamiltonian(ints), 2, 0.0)
    assert transition_energy(sp, 0) == 0.0
    assert transition_energy(sp, 3) == pytest.approx(sp.energies[3] - sp.energies[0])


def test_tdm_norm_zero_operator():
    rng = np.random.default_rng(8)
    a = rng.normal(size=8) + 1j * rng.normal(size=8)
    b = rng.normal(size=8) + 1j * rng.normal(size=8)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    zero = (PauliSum(3), PauliSum(3), PauliSum(3))
    assert tdm_norm(a, b, zero) == 0.0


def test_tdm_norm_phase_invariant():
    rng = np.random.default_rng(9)
    n = 3
    a = rng.normal(size=8) + 1j * rng.normal(size=8)
    b = rng.normal(size=8) + 1j * rng.normal(size=8)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    mu = []
    for seed in range(3):
        s = PauliSum(n)
        r2 = np.random.default_rng(20 + seed)
        for _ in range(4):
            s.add_term(PauliString(r2.integers(0, 4, n)), float(r2.normal()))
        mu.append(s)
    mu = tuple(mu)
    base = tdm_norm(a, b, mu)
    for _ in range(5):
        pa = np.exp(1j * rng.uniform(0, 2 * np.pi))
        pb = np.exp(1j * rng.uniform(0, 2 * np.pi))
        assert abs(tdm_norm(pa * a, pb * b, mu) - base) < 1e-12


def test_tdm_norm_matches_dense_sandwich():
    rng = np.random.default_rng(10)
    n = 3
    a = rng.normal(size=8) + 1j * rng.normal(size=8)
    b = rng.normal(size=8) + 1j * rng.normal(size=8)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    mu = []
    for seed in range(3):
        s = PauliSum(n)
        r2 = np.random.default_rng(30 + seed)
        for _ in range(4):
            s.add_term(PauliString(r2.integers(0, 4, n)), float(r2.normal()))
        mu.append(s)
    oracle = np.sqrt(sum(abs(np.vdot(b, m.to_dense() @ a)) ** 2 for m in mu))
    assert abs(tdm_norm(a, b, tuple(mu)) - oracle) < 1e-9


def test_scaling_round_trip_and_anchors():
    s = Scaling(r_min=0.4, r_max=2.6, y_min=-0.2, y_max=0.6)
    assert s.scale_r(0.4) == -1.0
    assert s.scale_r(2.6) == 1.0
    assert s.scale_r(1.5) == pytest.approx(0.0)
    y = np.linspace(-0.2, 0.6, 7)
    assert np.max(np.abs(s.unscale_y(s.scale_y(y)) - y)) < 1e-12
    assert s.y_half_range == pytest.approx(0.4)


def test_scaling_degenerate_span():
    s = Scaling(0.0, 1.0, 0.5, 0.5)
    assert np.all(s.scale_y(np.array([0.5, 0.5])) == 0.0)
    assert s.y_half_range == 1.0


def test_dataset_cache_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    states = rng.normal(size=(4, 8)) + 1j * rng.normal(size=(4, 8))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    ds = Dataset(
        molecule="toy", kind="transition_energy", label="T1",
        states=states, r=np.linspace(0.5, 2.0, 4), y=np.array([0.1, 0.2, 0.15, 0.3]),
        scaling=Scaling(0.5, 2.0, 0.1, 0.3),
    )
    path = tmp_path / "ds.json"
    ds.save(path)
    ds2 = Dataset.load(path)
    assert np.array_equal(ds2.states, ds.states)
    assert np.array_equal(ds2.r, ds.r)
    assert np.array_equal(ds2.y, ds.y)
    assert ds2.scaling == ds.scaling
    assert ds2.molecule == "toy" and ds2.label == "T1"
