"""pytest program for the module _fairness_metrics.py"""
import numpy as np
import pytest

from fairgbt import (
    DataError,
    GroupView,
    fairness_loss,
    snapshot,
    spd,
    theil,
    wasserstein1d,
)
from fairgbt._fairness_metrics import grid_quantiles, wasserstein_grid

A = np.array([1, 1, 0, 0])
EXTREME = GroupView(np.array([0.9, 0.9, 0.1, 0.1]), A)
MIXED = GroupView(np.array([0.6, 0.4, 0.7, 0.2]), A)


def _transport_oracle(u, v):
    # n1 copies of every u point and n0 copies of every v point give two
    # equally sized multisets; W1 is then the mean sorted-matching gap
    uu = np.sort(np.repeat(u, len(v)))
    vv = np.sort(np.repeat(v, len(u)))
    return float(np.mean(np.abs(uu - vv)))


def test_group_view_rejects_empty_group():
    with pytest.raises(DataError):
        GroupView(np.array([0.2, 0.3]), np.array([1, 1]))


def test_group_view_rejects_out_of_range():
    with pytest.raises(DataError):
        GroupView(np.array([0.2, 1.3]), np.array([0, 1]))


def test_spd_hard():
    assert spd(EXTREME) == 1.0
    assert spd(MIXED) == 0.0


def test_spd_soft():
    assert spd(MIXED, "soft") == pytest.approx(0.05, abs=1e-12)


def test_spd_symmetric_groups():
    v = GroupView(np.array([0.3, 0.8, 0.8, 0.3]), A)
    assert spd(v) == 0.0
    assert spd(v, "soft") == 0.0


def test_spd_depends_only_on_indicators():
    p = np.array([0.51, 0.2, 0.99, 0.49])
    squashed = np.array([0.5, 0.0, 1.0, 0.3])
    assert spd(GroupView(p, A)) == spd(GroupView(squashed, A))


def test_spd_unknown_mode():
    with pytest.raises(DataError):
        spd(MIXED, "fuzzy")


def test_theil():
    assert theil(np.full(5, 0.3)) == 0.0
    assert theil([0.2, 0.8]) == pytest.approx(0.38549, abs=1e-5)
    assert theil([0.2, 0.8], normalized=True) == pytest.approx(
        0.192745, abs=1e-5
    )


def test_theil_nonnegative_and_floored():
    rng = np.random.default_rng(1)
    for _ in range(50):
        assert theil(rng.uniform(size=20)) >= 0.0
    assert np.isfinite(theil([0.0, 0.5, 1.0]))


def test_wasserstein_examples():
    assert wasserstein1d([0.1, 0.7], [0.7, 0.1]) == 0.0
    assert wasserstein1d([0.0], [1.0]) == 1.0
    assert wasserstein1d([0.0, 1.0], [0.5, 0.5]) == 0.5


def test_wasserstein_matches_transport_oracle():
    rng = np.random.default_rng(2)
    for _ in range(500):
        u = rng.uniform(size=rng.integers(1, 13))
        v = rng.uniform(size=rng.integers(1, 13))
        assert wasserstein1d(u, v) == pytest.approx(
            _transport_oracle(u, v), abs=1e-12
        )


def test_wasserstein_symmetry_and_triangle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        u, v, w = (rng.uniform(size=rng.integers(1, 10)) for _ in range(3))
        assert wasserstein1d(u, v) == pytest.approx(wasserstein1d(v, u),
                                                    abs=1e-12)
        assert wasserstein1d(u, w) <= (
            wasserstein1d(u, v) + wasserstein1d(v, w) + 1e-12
        )
        assert 0.0 <= wasserstein1d(u, v) <= 1.0


def test_wasserstein_empty_group():
    with pytest.raises(DataError):
        wasserstein1d([], [0.5])


def test_grid_quantiles_end_points():
    q = grid_quantiles([0.9, 0.1, 0.5])
    assert q.shape == (101,)
    assert q[0] == 0.1
    assert q[50] == 0.5
    assert q[-1] == 0.9


def test_wasserstein_grid():
    # quantile function of {0, 1} is t, of {0.5, 0.5} is 0.5
    assert wasserstein_grid([0.0, 1.0], [0.5, 0.5]) == pytest.approx(
        25.5 / 101.0, abs=1e-12
    )
    assert wasserstein_grid([0.2, 0.9, 0.4], [0.9, 0.4, 0.2]) == 0.0


def test_fairness_loss():
    assert fairness_loss(EXTREME, 1.0, 0.0, 0.0) == 1.0
    v = GroupView(np.array([0.5, 0.5, 0.0, 1.0]), A)
    assert fairness_loss(v, 0.0, 0.0, 1.0) == 0.5
    symmetric = GroupView(np.array([0.3, 0.7, 0.7, 0.3]), A)
    assert fairness_loss(symmetric, 1.0, 0.0, 1.0) == 0.0
    assert fairness_loss(symmetric, 1.0, 0.0, 1.0, mode="soft") == 0.0


def test_fairness_loss_negative_weight():
    with pytest.raises(DataError):
        fairness_loss(MIXED, -0.1, 0.0, 0.0)


def test_snapshot():
    s = snapshot(MIXED)
    assert s.spd == 0.0
    assert s.spd == s.rate_group1 - s.rate_group0
    assert (s.m0, s.m1) == (2, 2)
    assert s.theil_normalized == pytest.approx(s.theil / 4)
    assert set(s.to_dict()) == {
        "spd",
        "theil",
        "theil_normalized",
        "wasserstein",
        "rate_group0",
        "rate_group1",
        "m0",
        "m1",
    }


def test_snapshot_symmetric_constant():
    s = snapshot(GroupView(np.full(4, 0.4), A))
    assert (s.spd, s.theil, s.wasserstein) == (0.0, 0.0, 0.0)
