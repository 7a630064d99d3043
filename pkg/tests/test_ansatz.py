"""Template construction, parameter counts, pooling, observable basis."""

import numpy as np
import pytest

from siqnn.ansatz import (
    CircuitTemplate,
    build_observable_basis,
    build_siqnn,
    param_count_formula,
    spin_swap_index,
    spin_swap_state,
)

from oracles import dense_circuit_unitary


@pytest.mark.parametrize("n_orb,count", [(2, 5), (4, 21), (8, 53)])
def test_constructed_counts_match_formula(n_orb, count):
    t = build_siqnn(n_orb)
    assert t.param_count == count
    assert param_count_formula(n_orb) == count


def test_constructed_count_odd_orbitals():
    assert build_siqnn(5).param_count == 35
    assert build_siqnn(3).param_count == 16


def test_formula_matches_construction_for_16():
    assert param_count_formula(16) == 117
    assert build_siqnn(16).param_count == 117


def test_formula_rejects_non_power_of_two():
    for bad in (3, 5, 6, 12):
        with pytest.raises(ValueError):
            param_count_formula(bad)


def test_build_rejects_tiny():
    with pytest.raises(ValueError):
        build_siqnn(1)


@pytest.mark.parametrize("n_orb", [2, 4, 8, 16])
def test_level_count_is_log2(n_orb):
    t = build_siqnn(n_orb)
    assert len(t.levels) == int(np.ceil(np.log2(n_orb)))


def test_level_gate_counts_halve():
    t = build_siqnn(8)
    n_counts = [lvl["n_pairs"] for lvl in t.levels]
    assert n_counts == [8, 4, 1]
    p_counts = [lvl["p_pairs"] for lvl in t.levels]
    assert p_counts == [4, 2, 1]


def test_surviving_qubits_symmetric():
    for n_orb in (2, 4, 5, 6):
        t = build_siqnn(n_orb)
        assert len(t.surviving_alpha) == 2
        assert set(t.surviving) == set(t.surviving_alpha) | {
            q + n_orb for q in t.surviving_alpha
        }


def test_beta_gates_share_alpha_slots():
    t = build_siqnn(4)
    by_slots = {}
    for g in t.gates:
        by_slots.setdefault(g.slots, []).append(g)
    for slots, gates in by_slots.items():
        assert len(gates) == 2
        g_a, g_b = gates
        assert tuple(q + 4 for q in g_a.qubits) == g_b.qubits


@pytest.mark.parametrize("n_orb", [2, 4])
def test_spin_swap_invariance_of_unitary(n_orb):
    t = build_siqnn(n_orb)
    rng = np.random.default_rng(41)
    params = rng.uniform(-2, 2, t.param_count)
    u = dense_circuit_unitary(t.gates, params, t.n_qubits)
    perm = spin_swap_index(np.arange(1 << t.n_qubits), n_orb)
    u_swapped = u[np.ix_(perm, perm)]
    assert np.max(np.abs(u - u_swapped)) < 1e-10


def test_spin_swap_state_involution():
    rng = np.random.default_rng(4)
    amps = rng.normal(size=16) + 1j * rng.normal(size=16)
    assert np.allclose(spin_swap_state(spin_swap_state(amps, 2), 2), amps)


def test_observable_basis_size_and_order():
    t = build_siqnn(4)
    basis = build_observable_basis(t)
    assert len(basis) == 10
    # Identity first.
    first = list(basis.terms[0])
    assert len(first) == 1 and first[0][0].weight == 0
    weights = [next(iter(term))[0].weight for term in basis.terms]
    assert weights == sorted(weights)


def test_observable_basis_all_z_and_qwc():
    t = build_siqnn(5)
    basis = build_observable_basis(t)
    for term in basis.terms:
        for string, coeff in term:
            assert string.is_all_z()
            assert coeff == 1.0
    strings = [s for term in basis.terms for s, _ in term]
    for a in strings:
        for b in strings:
            assert a.qwc(b)


def test_observable_basis_spin_swap_invariant():
    t = build_siqnn(4)
    basis = build_observable_basis(t)
    perm = spin_swap_index(np.arange(1 << t.n_qubits), t.n_orb)
    for term in basis.terms:
        m = np.zeros(1 << t.n_qubits)
        for string, coeff in term:
            idx = np.arange(1 << t.n_qubits)
            par = np.bitwise_count(np.bitwise_and(idx, string.z_mask)).astype(int)
            m += coeff.real * np.where(par & 1, -1.0, 1.0)
        assert np.max(np.abs(m - m[perm])) < 1e-14


def test_observable_terms_act_on_surviving_only():
    t = build_siqnn(6)
    basis = build_observable_basis(t)
    allowed = set(t.surviving)
    for term in basis.terms:
        for string, _ in term:
            assert set(string.support()) <= allowed


def test_observable_basis_linearly_independent():
    t = build_siqnn(4)
    basis = build_observable_basis(t)
    rows = []
    for term in basis.terms:
        idx = np.arange(1 << t.n_qubits)
        row = np.zeros(idx.size)
        for string, coeff in term:
            par = np.bitwise_count(np.bitwise_and(idx, string.z_mask)).astype(int)
            row += coeff.real * np.where(par & 1, -1.0, 1.0)
        rows.append(row)
    assert np.linalg.matrix_rank(np.stack(rows)) == len(basis)


def test_template_json_round_trip():
    t = build_siqnn(5)
    t2 = CircuitTemplate.from_json(t.to_json())
    assert t2 == t
    assert t2.hash() == t.hash()


def test_pool_map_keeps_lower_index():
    t = build_siqnn(4)
    first_level = t.pool_map[0]
    assert [(step.pair, step.kept) for step in first_level] == [((0, 1), 0), ((2, 3), 2)]
