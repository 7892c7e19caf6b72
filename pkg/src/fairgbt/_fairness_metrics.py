"""
Group fairness metrics of predicted probabilities

Hard metrics threshold the probabilities and are the reported numbers. Soft
metrics are differentiable surrogates used inside training: the mean
probability gap instead of the positive-rate gap, and a Wasserstein distance
between quantile functions sampled on a fixed grid.

Imports
-------
dataclasses, numpy, scipy.stats

Exports
-------
GroupView, FairnessSnapshot, spd, theil, wasserstein1d, wasserstein_grid,
grid_quantiles, fairness_loss, snapshot, HARD, SOFT, QUANTILE_GRID
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import wasserstein_distance

from ._errors import DataError

HARD = "hard"
SOFT = "soft"
PROB_FLOOR = 1e-12
QUANTILE_GRID = 101


@dataclass(frozen=True, eq=False)
class GroupView:
    """
    Predicted probabilities split by the sensitive attribute

    Attributes
    ----------
    p_hat : ndarray (m,)
        probabilities in [0, 1]
    a : ndarray (m,)
        sensitive attribute in {0, 1}
    threshold : float
        decision threshold of the hard metrics
    """

    p_hat: np.ndarray
    a: np.ndarray
    threshold: float = 0.5

    def __post_init__(self):
        p_hat = np.asarray(self.p_hat, dtype=np.float64)
        a = np.asarray(self.a)
        if p_hat.ndim != 1 or p_hat.shape != a.shape:
            raise DataError(
                f"p_hat and a must be aligned vectors: {p_hat.shape}, "
                f"{a.shape}"
            )
        if np.any((p_hat < 0.0) | (p_hat > 1.0)) or np.any(np.isnan(p_hat)):
            raise DataError("probabilities must lie in [0, 1]")
        if not np.isin(a, (0, 1)).all():
            raise DataError("sensitive values must be 0 or 1")
        a = a.astype(np.int64)
        m1 = int(a.sum())
        if m1 == 0 or m1 == a.size:
            raise DataError(
                f"empty sensitive group (m0={a.size - m1}, m1={m1})"
            )
        object.__setattr__(self, "p_hat", p_hat)
        object.__setattr__(self, "a", a)

    @property
    def p0(self):
        return self.p_hat[self.a == 0]

    @property
    def p1(self):
        return self.p_hat[self.a == 1]


@dataclass(frozen=True)
class FairnessSnapshot:
    """
    Hard fairness metrics of one model state

    Attributes
    ----------
    spd : float
        rate_group1 - rate_group0
    theil : float
        Theil index, unnormalized sum over all predictions
    theil_normalized : float
        theil / m
    wasserstein : float
        exact W1 between the groups' probability distributions
    rate_group0, rate_group1 : float
        positive-prediction rates of the groups a = 0 and a = 1
    m0, m1 : int
        group sizes
    """

    spd: float
    theil: float
    theil_normalized: float
    wasserstein: float
    rate_group0: float
    rate_group1: float
    m0: int
    m1: int

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(
            spd=float(d["spd"]),
            theil=float(d["theil"]),
            theil_normalized=float(d["theil_normalized"]),
            wasserstein=float(d["wasserstein"]),
            rate_group0=float(d["rate_group0"]),
            rate_group1=float(d["rate_group1"]),
            m0=int(d["m0"]),
            m1=int(d["m1"]),
        )


def _check_mode(mode):
    if mode not in (HARD, SOFT):
        raise DataError(f"mode must be '{HARD}' or '{SOFT}', got '{mode}'")


def positive_rates(v: GroupView):
    """Hard positive-prediction rates (group 0, group 1)"""
    positive = v.p_hat >= v.threshold
    return (
        float(np.mean(positive[v.a == 0])),
        float(np.mean(positive[v.a == 1])),
    )


def spd(v: GroupView, mode: str = HARD) -> float:
    """
    Statistical parity difference P(yhat=1 | a=1) - P(yhat=1 | a=0)

    Parameters
    ----------
    v : GroupView
    mode : str
        'hard' thresholds at v.threshold, 'soft' compares mean probabilities

    Returns
    -------
    float
    """

    _check_mode(mode)
    if mode == HARD:
        rate0, rate1 = positive_rates(v)
        return rate1 - rate0
    # sorted sums: identical multisets give exactly 0
    return float(np.mean(np.sort(v.p1)) - np.mean(np.sort(v.p0)))


def theil(p_hat, normalized: bool = False) -> float:
    """
    Theil index of the predicted probabilities

    sum_i (p_i / p_bar) ln(p_i / p_bar) over all predictions, divided by m
    when normalized. Probabilities are floored at 1e-12.

    Parameters
    ----------
    p_hat : ndarray
    normalized : bool

    Returns
    -------
    float
        >= 0
    """

    p = np.maximum(np.asarray(p_hat, dtype=np.float64), PROB_FLOOR)
    if p.size == 0:
        raise DataError("theil of an empty vector")
    if np.ptp(p) == 0.0:
        return 0.0
    ratio = p / np.mean(p)
    total = max(float(np.sum(ratio * np.log(ratio))), 0.0)
    if normalized:
        return total / p.size
    return total


def wasserstein1d(p_group0, p_group1) -> float:
    """
    Exact 1-Wasserstein distance between two empirical distributions

    Area between the two empirical CDFs over the merged sorted support.

    Parameters
    ----------
    p_group0, p_group1 : ndarray

    Returns
    -------
    float
    """

    p_group0 = np.asarray(p_group0, dtype=np.float64)
    p_group1 = np.asarray(p_group1, dtype=np.float64)
    if p_group0.size == 0 or p_group1.size == 0:
        raise DataError("wasserstein1d of an empty group")
    return float(wasserstein_distance(p_group0, p_group1))


def grid_positions(n: int, q: int = QUANTILE_GRID):
    """
    Interpolation indices of a q-point quantile grid over n sorted values

    Returns
    -------
    (lo, hi, frac)
        quantile k is (1 - frac[k]) * s[lo[k]] + frac[k] * s[hi[k]]
    """

    position = np.linspace(0.0, 1.0, q) * (n - 1)
    lo = np.floor(position).astype(np.int64)
    hi = np.minimum(lo + 1, n - 1)
    return lo, hi, position - lo


def grid_quantiles(values, q: int = QUANTILE_GRID):
    """Linearly interpolated quantiles of values on a q-point grid"""
    s = np.sort(np.asarray(values, dtype=np.float64))
    lo, hi, frac = grid_positions(s.size, q)
    return (1.0 - frac) * s[lo] + frac * s[hi]


def wasserstein_grid(p_group0, p_group1, q: int = QUANTILE_GRID) -> float:
    """
    Differentiable Wasserstein surrogate: mean absolute gap between the
    groups' quantile functions on a q-point grid
    """

    if len(p_group0) == 0 or len(p_group1) == 0:
        raise DataError("wasserstein_grid of an empty group")
    gap = grid_quantiles(p_group1, q) - grid_quantiles(p_group0, q)
    return float(np.mean(np.abs(gap)))


def fairness_loss(
    v: GroupView,
    w1: float,
    w2: float,
    w3: float,
    mode: str = HARD,
    theil_normalized: bool = False,
) -> float:
    """
    Weighted fairness penalty w1 |SPD| + w2 Theil + w3 W

    In soft mode SPD is the mean probability gap and W the quantile-grid
    surrogate; hard mode uses the thresholded SPD and the exact W1.

    Parameters
    ----------
    v : GroupView
    w1, w2, w3 : float
        nonnegative weights
    mode : str
    theil_normalized : bool
        use the size-normalized Theil index

    Returns
    -------
    float
    """

    _check_mode(mode)
    if min(w1, w2, w3) < 0:
        raise DataError("fairness weights must be >= 0")
    loss = 0.0
    if w1:
        loss += w1 * abs(spd(v, mode))
    if w2:
        loss += w2 * theil(v.p_hat, normalized=theil_normalized)
    if w3:
        if mode == HARD:
            loss += w3 * wasserstein1d(v.p0, v.p1)
        else:
            loss += w3 * wasserstein_grid(v.p0, v.p1)
    return loss


def snapshot(v: GroupView) -> FairnessSnapshot:
    """
    Hard fairness metrics of one set of predictions

    Parameters
    ----------
    v : GroupView

    Returns
    -------
    FairnessSnapshot
    """

    rate0, rate1 = positive_rates(v)
    literal = theil(v.p_hat)
    return FairnessSnapshot(
        spd=rate1 - rate0,
        theil=literal,
        theil_normalized=literal / v.p_hat.size,
        wasserstein=wasserstein1d(v.p0, v.p1),
        rate_group0=rate0,
        rate_group1=rate1,
        m0=int(np.sum(v.a == 0)),
        m1=int(np.sum(v.a == 1)),
    )
