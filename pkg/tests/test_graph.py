import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spongearb.data import ReturnsPanel, TradingCalendar
from spongearb.graph import (SignedGraph, correlation_graph, normalized_laplacian,
                             sign_split, sym_laplacians)
from spongearb.synthetic import business_days


def _returns(window):
    window = np.asarray(window, dtype=float)
    n_days, n = window.shape
    r = np.vstack([np.full((1, n), np.nan), window])
    cal = TradingCalendar(business_days("2020-01-01", n_days + 1))
    return ReturnsPanel(cal, [f"T{j}" for j in range(n)], r)


def _brute_corr(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y)) / (n - 1)
    sx = (sum((a - mx) ** 2 for a in x) / (n - 1)) ** 0.5
    sy = (sum((b - my) ** 2 for b in y) / (n - 1)) ** 0.5
    return cov / (sx * sy)


def _random_signed(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (n, n))
    A = (A + A.T) / 2
    np.fill_diagonal(A, 1.0)
    return SignedGraph([str(i) for i in range(n)], A)


def test_identical_and_negated_series():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 0.01, 30)
    g = correlation_graph(_returns(np.column_stack([x, x, -x])), 30, 30)
    assert g.A[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert g.A[0, 2] == pytest.approx(-1.0, abs=1e-12)


def test_matches_textbook_formula():
    rng = np.random.default_rng(1)
    w = rng.normal(0, 0.02, (30, 5))
    g = correlation_graph(_returns(w), 30, 30)
    for i in range(5):
        for j in range(5):
            expect = 1.0 if i == j else _brute_corr(w[:, i].tolist(), w[:, j].tolist())
            assert abs(g.A[i, j] - expect) < 1e-12


def test_zero_variance_dropped(caplog):
    rng = np.random.default_rng(2)
    w = rng.normal(0, 0.01, (30, 3))
    w[:, 1] = 0.001
    g = correlation_graph(_returns(w), 30, 30)
    assert g.tickers == ["T0", "T2"]
    assert "zero-variance" in caplog.text


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 12))
def test_graph_invariants(seed, n):
    rng = np.random.default_rng(seed)
    w = rng.normal(0, 0.02, (30, n)) + rng.normal(0, 0.02, (30, 1))
    g = correlation_graph(_returns(w), 30, 30)
    assert np.array_equal(g.A, g.A.T)
    assert (np.diag(g.A) == 1).all()
    assert (np.abs(g.A) <= 1).all()


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    w = rng.normal(0, 0.02, (30, 6))
    perm = rng.permutation(6)
    A = correlation_graph(_returns(w), 30, 30).A
    B = correlation_graph(_returns(w[:, perm]), 30, 30).A
    np.testing.assert_allclose(B, A[np.ix_(perm, perm)], atol=1e-14)


def test_sign_split_examples():
    A = np.array([[1.0, 0.5, -0.3], [0.5, 1.0, 0.0], [-0.3, 0.0, 1.0]])
    s = sign_split(SignedGraph(["a", "b", "c"], A))
    assert s.A_plus[0, 1] == 0.5 and s.A_minus[0, 2] == 0.3
    assert s.A_plus[0, 2] == 0.0 and s.A_minus[0, 1] == 0.0
    assert np.all(np.diag(s.A_plus) == 0) and np.all(np.diag(s.A_minus) == 0)
    np.testing.assert_array_equal(s.d_plus, [0.5, 0.5, 0.0])
    np.testing.assert_array_equal(s.D_minus, np.diag([0.3, 0.0, 0.3]))

    pos = sign_split(SignedGraph(["a", "b"], np.array([[1.0, 0.4], [0.4, 1.0]])))
    assert not pos.A_minus.any()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 15))
def test_sign_split_reconstructs(seed, n):
    g = _random_signed(n, seed)
    s = sign_split(g)
    off = g.A - np.diag(np.diag(g.A))
    assert np.array_equal(s.A_plus - s.A_minus, off)
    assert (s.A_plus >= 0).all() and (s.A_minus >= 0).all()


def test_k2_laplacian():
    g = SignedGraph(["a", "b"], np.array([[1.0, 1.0], [1.0, 1.0]]))
    L_plus, L_minus = sym_laplacians(sign_split(g))
    np.testing.assert_allclose(L_plus, [[1, -1], [-1, 1]], atol=1e-15)
    assert not L_minus.any()


def test_literal_convention_is_negated():
    g = _random_signed(5, 9)
    s = sign_split(g)
    std = normalized_laplacian(s.A_plus, s.d_plus, "standard")
    lit = normalized_laplacian(s.A_plus, s.d_plus, "literal")
    np.testing.assert_allclose(lit, -std, atol=1e-15)
    with pytest.raises(ValueError):
        normalized_laplacian(s.A_plus, s.d_plus, "other")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 20))
def test_laplacians_psd(seed, n):
    for L in sym_laplacians(sign_split(_random_signed(n, seed))):
        assert np.allclose(L, L.T, atol=1e-14)
        assert np.linalg.eigvalsh(L).min() >= -1e-10


def test_asymmetric_adjacency_rejected():
    with pytest.raises(Exception):
        SignedGraph(["a", "b"], np.array([[1.0, 0.2], [0.3, 1.0]]))
