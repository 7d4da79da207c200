import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spongearb.clustering import ClusterAssignment, SpongeConfig
from spongearb.data import ReturnsPanel, TradingCalendar
from spongearb.errors import DataError
from spongearb.graph import SignedGraph
from spongearb.signals import (DatasetConfig, Signal, build_insample_dataset,
                               extract_features, feature_matrix, generate_signals,
                               label_signal, write_dataset)
from spongearb.synthetic import business_days, planted_universe


def _returns(window, tickers=None):
    window = np.asarray(window, dtype=float)
    n_days, n = window.shape
    r = np.vstack([np.full((1, n), np.nan), window])
    cal = TradingCalendar(business_days("2020-01-01", n_days + 1))
    return ReturnsPanel(cal, tickers or [f"T{j}" for j in range(n)], r)


def _five_day_returns_with_cum(cums):
    """Daily returns whose 5-day compounded total equals ``cums``."""
    daily = (1 + np.asarray(cums)) ** 0.2 - 1
    return np.tile(daily, (5, 1))


def test_rule_three_members():
    rets = _returns(_five_day_returns_with_cum([0.10, 0.0, -0.10]))
    # compounded cumrets are {0.1, 0, -0.1} up to rounding; mean ~0
    asg = ClusterAssignment({"T0": 0, "T1": 0, "T2": 0}, 1)
    sigs = {s.ticker: s.direction for s in generate_signals(asg, rets, 5)}
    assert sigs["T0"] == "short" and sigs["T2"] == "long"
    cum = np.prod(1 + rets.returns[1:], axis=0) - 1
    assert ("T1" in sigs) == (abs(cum[1] - cum.mean()) > 0)


def test_middle_member_exactly_at_mean():
    w = np.zeros((5, 3))
    w[0] = [0.5, 0.0, -0.5]  # cumrets exactly {0.5, 0, -0.5}
    asg = ClusterAssignment({"T0": 0, "T1": 0, "T2": 0}, 1)
    sigs = {s.ticker: s.direction for s in generate_signals(asg, _returns(w), 5)}
    assert sigs == {"T0": "short", "T2": "long"}


def test_identical_members_no_signal():
    w = np.tile([[0.01, 0.01, 0.01]], (5, 1))
    asg = ClusterAssignment({"T0": 0, "T1": 0, "T2": 0}, 1)
    assert generate_signals(asg, _returns(w), 5) == []


def test_singleton_cluster_silent():
    w = np.random.default_rng(0).normal(0, 0.02, (5, 3))
    asg = ClusterAssignment({"T0": 0, "T1": 1, "T2": 1}, 2)
    assert {s.ticker for s in generate_signals(asg, _returns(w), 5)} <= {"T1", "T2"}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 12), st.integers(1, 4))
def test_signals_match_recomputation(seed, n, k):
    rng = np.random.default_rng(seed)
    w = rng.normal(0, 0.02, (8, n))
    labels = {f"T{j}": int(rng.integers(0, k)) for j in range(n)}
    used = sorted(set(labels.values()))
    labels = {t: used.index(c) for t, c in labels.items()}
    asg = ClusterAssignment(labels, len(used))
    sigs = generate_signals(asg, _returns(w), 8)

    expect = {}
    for c in range(asg.k):
        members = [t for t, cc in labels.items() if cc == c]
        cum = {t: np.prod(1 + w[-5:, int(t[1:])]) - 1 for t in members}
        m = sum(cum.values()) / len(members)
        assert abs(sum(v - m for v in cum.values())) < 1e-12
        if len(members) < 2:
            continue
        for t, v in cum.items():
            if v != m:
                expect[t] = ("long" if v < m else "short", v - m)
    got = {s.ticker: (s.direction, s.deviation) for s in sigs}
    assert set(got) == set(expect)
    for t, (d, dev) in got.items():
        assert d == expect[t][0]
        assert dev == pytest.approx(expect[t][1], abs=1e-15)
        assert (d == "long") == (dev < 0)


def _brute_features(i, A, labels, k, win, dev, sign):
    G = len(A)
    members = [n for n in range(G) if labels[n] == labels[i]]
    S = len(members)
    local = (sum(A[i][n] for n in members) - 1) / (S - 1)
    glob = (sum(A[i][n] for n in range(G)) - 1) / (G - 1)
    dens = sum(sum(A[a][n] for n in members) - 1 for a in members) / ((S - 1) * S)
    cl_mean = sum(win[d][n] for d in range(len(win)) for n in members) / (len(win) * S)
    st_mean = sum(win[d][i] for d in range(len(win))) / len(win)
    return [local, glob, dens, S / G, k / G, dev, sign, cl_mean, st_mean]


def test_clique_features():
    A = np.ones((3, 3))
    g = SignedGraph(["T0", "T1", "T2"], A)
    asg = ClusterAssignment({"T0": 0, "T1": 0, "T2": 0}, 1)
    rets = _returns(np.random.default_rng(0).normal(0, 0.01, (12, 3)))
    f = extract_features(Signal("T0", rets.calendar.dates[12], "long", -0.01, 0),
                         g, asg, rets)
    assert f.local_vertex_degree == pytest.approx(1.0)
    assert f.graph_density == pytest.approx(1.0)


def test_size_and_count_ratios():
    rng = np.random.default_rng(1)
    A = np.corrcoef(rng.normal(size=(40, 10)), rowvar=False)
    tickers = [f"T{j}" for j in range(10)]
    asg = ClusterAssignment({t: int(j >= 5) for j, t in enumerate(tickers)}, 2)
    rets = _returns(rng.normal(0, 0.01, (12, 10)))
    f = extract_features(Signal("T2", rets.calendar.dates[12], "short", 0.02, 0),
                         SignedGraph(tickers, A), asg, rets)
    assert f.cluster_size_ratio == 0.5 and f.cluster_count_ratio == 0.2
    assert f.direction_sign == -1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.integers(4, 12))
def test_features_match_formulas(seed, G):
    rng = np.random.default_rng(seed)
    A = np.corrcoef(rng.normal(size=(30, G)), rowvar=False)
    np.fill_diagonal(A, 1.0)
    tickers = [f"T{j}" for j in range(G)]
    lab = np.array([j % 2 for j in range(G)])
    asg = ClusterAssignment(dict(zip(tickers, lab.tolist())), 2)
    w = rng.normal(0, 0.01, (15, G))
    rets = _returns(w)
    i = int(rng.integers(0, G))
    sig = Signal(tickers[i], rets.calendar.dates[15], "long", -0.003, int(lab[i]))
    got = feature_matrix([sig], SignedGraph(tickers, A), asg, rets, 15)[0]
    expect = _brute_features(i, A.tolist(), lab.tolist(), 2, w[-10:].tolist(), -0.003, 1.0)
    np.testing.assert_allclose(got, expect, rtol=0, atol=1e-12)
    assert 0 < got[3] <= 1 and 0 < got[4] <= 1


def test_singleton_feature_error():
    g = SignedGraph(["T0", "T1"], np.eye(2))
    asg = ClusterAssignment({"T0": 0, "T1": 1}, 2)
    rets = _returns(np.zeros((12, 2)))
    with pytest.raises(DataError):
        extract_features(Signal("T0", rets.calendar.dates[12], "long", -0.1, 0), g, asg, rets)


@pytest.mark.parametrize("path,expect", [
    ([0.01, 0.05, 0.02], (1, "cond1")),
    ([0.01, 0.002], (1, "cond2")),
    ([-0.02, -0.001], (0, "none")),
])
def test_label_examples(path, expect):
    assert label_signal(path, 0.04, 0.001) == expect


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=1, max_size=10),
       st.floats(0.001, 0.1), st.floats(0.0, 0.1))
def test_label_monotone_in_threshold(path, T, bump):
    lo, _ = label_signal(path, T, 0.001)
    hi, _ = label_signal(path, T + bump, 0.001)
    assert hi <= lo


@pytest.fixture(scope="module")
def two_block_panel():
    panel, _ = planted_universe(n_stocks=20, n_days=260, n_sectors=2, seed=4)
    return panel


def _cfg(**kw):
    return DatasetConfig(insample_days=250, sponge=SpongeConfig(seed=3), **kw)


def test_dataset_invariants(two_block_panel):
    samples = build_insample_dataset(two_block_panel, _cfg())
    assert samples
    for s in samples:
        assert (s.label == 1) == (s.condition_met in ("cond1", "cond2"))
        f = s.features
        assert 0 < f.cluster_size_ratio <= 1 and 0 < f.cluster_count_ratio <= 1
        assert f.direction_sign in (-1.0, 1.0)
        assert (f.direction_sign > 0) == (f.deviation_5d < 0)


def test_dataset_deterministic(two_block_panel, tmp_path):
    write_dataset(build_insample_dataset(two_block_panel, _cfg()), tmp_path / "a.csv")
    write_dataset(build_insample_dataset(two_block_panel, _cfg()), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_dataset_needs_history(two_block_panel):
    with pytest.raises(DataError):
        build_insample_dataset(two_block_panel, DatasetConfig(insample_days=1500))
