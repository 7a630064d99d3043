"""Pauli string/sum algebra against dense matrix references."""

import numpy as np
import pytest

from siqnn.paulis import PauliString, PauliSum, multiply, qwc_group

from oracles import dense_pauli

LABELS = "IXYZ"


def test_single_qubit_products_match_dense():
    for a in LABELS:
        for b in LABELS:
            phase, prod = multiply(PauliString.from_label(a), PauliString.from_label(b))
            assert np.array_equal(phase * dense_pauli(prod.label()),
                                  dense_pauli(a) @ dense_pauli(b))


def test_known_products():
    phase, prod = multiply(PauliString.from_label("X"), PauliString.from_label("Y"))
    assert phase == 1j and prod.label() == "Z"
    phase, prod = multiply(PauliString.from_label("Z"), PauliString.from_label("Z"))
    assert phase == 1 and prod.label() == "I"
    p = PauliString.from_label("XYZ")
    phase, prod = multiply(PauliString.identity(3), p)
    assert phase == 1 and prod == p


def test_multiply_length_mismatch():
    with pytest.raises(ValueError):
        multiply(PauliString.from_label("X"), PauliString.from_label("XX"))


def test_random_string_products_dense_exact():
    rng = np.random.default_rng(7)
    for _ in range(30):
        a = PauliString(rng.integers(0, 4, size=3))
        b = PauliString(rng.integers(0, 4, size=3))
        phase, prod = multiply(a, b)
        assert np.array_equal(phase * prod.to_dense(), a.to_dense() @ b.to_dense())


def test_dense_little_endian_convention():
    # 'XI' acts with X on qubit 0 only -> block-diagonal over qubit 1.
    m = PauliString.from_label("XI").to_dense()
    expected = np.kron(np.eye(2), np.array([[0, 1], [1, 0]]))
    assert np.array_equal(m, expected)
    assert np.array_equal(PauliString.from_label("Z").to_dense(), np.diag([1, -1]))
    assert np.array_equal(PauliString.from_label("X").to_dense(), np.array([[0, 1], [1, 0]]))


def test_sum_product_matches_dense():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = PauliSum(3)
        b = PauliSum(3)
        for _ in range(4):
            a.add_term(PauliString(rng.integers(0, 4, 3)), complex(*rng.normal(size=2)))
            b.add_term(PauliString(rng.integers(0, 4, 3)), complex(*rng.normal(size=2)))
        assert np.allclose((a @ b).to_dense(), a.to_dense() @ b.to_dense(), atol=1e-12)


def test_simplify_merges_and_drops():
    s = PauliSum(2)
    s.add_term(PauliString.from_label("XZ"), 0.5)
    s.add_term(PauliString.from_label("XZ"), 0.5)
    s.add_term(PauliString.from_label("YY"), 1e-14)
    s.add_term(PauliString.from_label("ZZ"), 1.0 + 1e-15j)
    s.simplify()
    assert len(s) == 2
    assert s.terms[PauliString.from_label("XZ")] == 1.0
    assert s.terms[PauliString.from_label("ZZ")] == 1.0  # imag dust removed


def test_hermitian_sum_dense_exactly_hermitian():
    rng = np.random.default_rng(11)
    s = PauliSum(3)
    for _ in range(12):
        s.add_term(PauliString(rng.integers(0, 4, 3)), float(rng.normal()))
    m = s.to_dense()
    assert np.max(np.abs(m - m.conj().T)) == 0.0


def test_qwc_examples():
    s = PauliSum(2)
    s.add_term(PauliString.from_label("ZI"), 1.0)
    s.add_term(PauliString.from_label("ZZ"), 0.5)
    assert len(qwc_group(s)) == 1

    t = PauliSum(1)
    t.add_term(PauliString.from_label("Z"), 1.0)
    t.add_term(PauliString.from_label("X"), 1.0)
    assert len(qwc_group(t)) == 2


def test_qwc_groups_partition_and_pairwise_commute():
    rng = np.random.default_rng(5)
    s = PauliSum(4)
    for _ in range(40):
        s.add_term(PauliString(rng.integers(0, 4, 4)), float(rng.normal()))
    groups = qwc_group(s)
    seen = []
    for group in groups:
        for (p1, _), (p2, _) in [(x, y) for x in group for y in group]:
            assert p1.qwc(p2)
        seen.extend(p for p, _ in group)
    assert sorted(p.ops for p in seen) == sorted(p.ops for p in s.terms)


def test_to_dense_size_guard():
    with pytest.raises(ValueError):
        PauliSum.identity(15).to_dense()
