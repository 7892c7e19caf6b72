"""
Fairness-aware boosting

The logistic gradients of every boosting round are augmented with the
analytic per-instance gradient of the soft fairness penalty
lambda * (w1 |SPD| + w2 Theil + w3 W). Hessians come from the logistic term
alone. With lambda > 0 every round is backtracked until the soft total loss
does not increase.

Imports
-------
dataclasses, math, time, numpy, loguru

Exports
-------
FairnessConfig, TraceRow, TrainingTrace, total_loss, soft_penalty,
fairness_gradient, train_fair, train_fair_traced
"""

from __future__ import annotations

import math
import time
from dataclasses import astuple, dataclass, field, fields
from typing import List

import numpy as np
from loguru import logger

from ._errors import DataError
from ._fairness_metrics import (
    PROB_FLOOR,
    QUANTILE_GRID,
    SOFT,
    GroupView,
    fairness_loss,
    grid_positions,
    spd,
    theil,
    wasserstein_grid,
)
from ._gbt import TrainConfig, TreeEnsemble, boost, mean_logloss, sigmoid

# |difference| below this counts as a tie: zero subgradient
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class FairnessConfig:
    """
    Fairness penalty theta = (lambda, w1, w2, w3)

    Attributes
    ----------
    lam : float
        overall penalty strength lambda >= 0
    w1, w2, w3 : float
        weights of |SPD|, Theil and Wasserstein in [0, 1]
    theil_normalized : bool
        penalize the size-normalized Theil index
    """

    lam: float = 0.0
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    theil_normalized: bool = True

    def __post_init__(self):
        for name in ("lam", "w1", "w2", "w3"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise DataError(f"{name} must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)
        for name in ("w1", "w2", "w3"):
            if getattr(self, name) > 1.0:
                raise DataError(f"{name} must be <= 1")

    @property
    def theta(self):
        return (self.lam, self.w1, self.w2, self.w3)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "w1": self.w1,
            "w2": self.w2,
            "w3": self.w3,
            "theil_normalized": self.theil_normalized,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            lam=float(d["lambda"]),
            w1=float(d["w1"]),
            w2=float(d["w2"]),
            w3=float(d["w3"]),
            theil_normalized=bool(d.get("theil_normalized", True)),
        )


def _soft_loss(p_hat, a, cfg: FairnessConfig):
    return fairness_loss(
        GroupView(p_hat, a),
        cfg.w1,
        cfg.w2,
        cfg.w3,
        mode=SOFT,
        theil_normalized=cfg.theil_normalized,
    )


def total_loss(p_hat, y, a, cfg: FairnessConfig) -> float:
    """
    Penalized objective L_log + lambda * L_fair (soft)

    Parameters
    ----------
    p_hat : ndarray
    y : ndarray
    a : ndarray
    cfg : FairnessConfig

    Returns
    -------
    float
    """

    p_hat = np.asarray(p_hat, dtype=np.float64)
    if len(y) != p_hat.size:
        raise DataError("p_hat and y must be aligned")
    loss = mean_logloss(p_hat, y)
    if cfg.lam == 0.0:
        GroupView(p_hat, a)     # group check only
        return loss
    return loss + cfg.lam * _soft_loss(p_hat, a, cfg)


def soft_penalty(margins, a, cfg: FairnessConfig) -> float:
    """lambda * L_fair (soft) as a function of the margins"""
    return cfg.lam * _soft_loss(sigmoid(np.asarray(margins)), a, cfg)


def _tie_sign(x):
    s = np.sign(x)
    return np.where(np.abs(x) <= TIE_TOLERANCE, 0.0, s)


def _spd_grad(p, a, m0, m1):
    gap = float(np.mean(np.sort(p[a == 1])) - np.mean(np.sort(p[a == 0])))
    sign = float(_tie_sign(gap))
    return np.where(a == 1, sign / m1, -sign / m0)


def _theil_grad(p, normalized):
    clamped = np.maximum(p, PROB_FLOOR)
    if np.ptp(clamped) == 0.0:
        return np.zeros_like(p)
    m = p.size
    p_bar = np.mean(clamped)
    ratio = clamped / p_bar
    total = np.sum(ratio * np.log(ratio))
    grad = (np.log(ratio) - total / m) / p_bar
    grad = np.where(p > PROB_FLOOR, grad, 0.0)
    if normalized:
        grad = grad / m
    return grad


def _wasserstein_grad(p, a, q=QUANTILE_GRID):
    grad = np.zeros_like(p)
    sorted_groups = []
    for group in (0, 1):
        rows = np.flatnonzero(a == group)
        order = rows[np.argsort(p[rows], kind="stable")]
        lo, hi, frac = grid_positions(order.size, q)
        s = p[order]
        sorted_groups.append(
            (order, lo, hi, frac, (1.0 - frac) * s[lo] + frac * s[hi])
        )

    gap_sign = _tie_sign(sorted_groups[1][4] - sorted_groups[0][4]) / q
    for direction, (order, lo, hi, frac, _) in zip((-1.0, 1.0), sorted_groups):
        d_sorted = np.zeros(order.size)
        np.add.at(d_sorted, lo, direction * gap_sign * (1.0 - frac))
        np.add.at(d_sorted, hi, direction * gap_sign * frac)
        grad[order] = d_sorted
    return grad


def fairness_gradient(margins, a, cfg: FairnessConfig) -> np.ndarray:
    """
    Gradient of lambda * L_fair (soft) with respect to every margin f_i

    SPD enters through sign(SPD) * (+-1 / m_group); the Theil index through
    its derivative via p_bar; the Wasserstein term through the sign of the
    quantile gap at each grid point, split onto the two interpolating
    samples. All three are chained through sigma'(f_i). Ties give zero.

    Parameters
    ----------
    margins : ndarray (m,)
    a : ndarray (m,)
    cfg : FairnessConfig

    Returns
    -------
    ndarray (m,)
    """

    margins = np.asarray(margins, dtype=np.float64)
    a = np.asarray(a)
    if margins.shape != a.shape:
        raise DataError("margins and a must be aligned")
    m1 = int(np.sum(a == 1))
    m0 = a.size - m1
    if m0 == 0 or m1 == 0:
        raise DataError(f"empty sensitive group (m0={m0}, m1={m1})")
    if cfg.lam == 0.0:
        return np.zeros_like(margins)

    p = sigmoid(margins)
    grad_p = np.zeros_like(p)
    if cfg.w1:
        grad_p += cfg.w1 * _spd_grad(p, a, m0, m1)
    if cfg.w2:
        grad_p += cfg.w2 * _theil_grad(p, cfg.theil_normalized)
    if cfg.w3:
        grad_p += cfg.w3 * _wasserstein_grad(p, a)
    return cfg.lam * grad_p * p * (1.0 - p)


@dataclass(frozen=True)
class TraceRow:
    """Soft objective terms after one boosting round"""

    round: int
    logloss: float
    fairness: float
    spd: float
    theil: float
    wasserstein: float
    total: float


@dataclass
class TrainingTrace:
    """Per-round audit trail of fairness-aware training"""

    rows: List[TraceRow] = field(default_factory=list)

    @staticmethod
    def header():
        return [f.name for f in fields(TraceRow)]

    def as_rows(self):
        return [list(astuple(row)) for row in self.rows]

    def monotonicity_violations(self):
        """Number of rounds whose total loss exceeds the previous round's"""
        totals = [row.total for row in self.rows]
        return sum(1 for prev, cur in zip(totals, totals[1:]) if cur > prev)


def _check_train(train):
    if not train.preprocessed:
        raise DataError("train_fair needs a preprocessed dataset")
    train.check_groups()


def _train(train, tcfg, fcfg, trace):
    start_time = time.time()
    m = train.m
    a = train.a
    y = train.y

    def objective(margins):
        return total_loss(sigmoid(margins), y, a, fcfg)

    extra = None
    line_objective = None
    if fcfg.lam > 0.0:
        line_objective = objective

        def extra(margins):
            return m * fairness_gradient(margins, a, fcfg)

    on_round = None
    if trace is not None:
        def on_round(t, margins):
            p = sigmoid(margins)
            v = GroupView(p, a)
            trace.rows.append(
                TraceRow(
                    round=t + 1,
                    logloss=mean_logloss(p, y),
                    fairness=_soft_loss(p, a, fcfg),
                    spd=spd(v, SOFT),
                    theil=theil(p, normalized=fcfg.theil_normalized),
                    wasserstein=wasserstein_grid(v.p0, v.p1),
                    total=objective(margins),
                )
            )

    model = boost(train.X, y, tcfg, extra_gradient=extra,
                  on_round=on_round, line_objective=line_objective)
    logger.debug(
        f"train_fair theta={fcfg.theta}: "
        f"run time: {round(time.time() - start_time, 2)} seconds"
    )
    return model


def train_fair(train, tcfg: TrainConfig, fcfg: FairnessConfig) -> TreeEnsemble:
    """
    Boosting on the penalized objective

    Per round g_i = (p_i - y_i) + m * fairness_gradient_i and
    h_i = p_i (1 - p_i), i.e. the gradients of m * L_total. With lam > 0
    each tree is halved until the round does not raise the soft L_total,
    so the total loss never increases between rounds. With lam = 0 the
    result equals train_baseline under the same TrainConfig.

    Parameters
    ----------
    train : Dataset
        preprocessed, both groups present
    tcfg : TrainConfig
    fcfg : FairnessConfig

    Returns
    -------
    TreeEnsemble
    """

    _check_train(train)
    return _train(train, tcfg, fcfg, None)


def train_fair_traced(train, tcfg: TrainConfig, fcfg: FairnessConfig):
    """
    train_fair plus the per-round TrainingTrace

    Returns
    -------
    (TreeEnsemble, TrainingTrace)
    """

    _check_train(train)
    trace = TrainingTrace()
    model = _train(train, tcfg, fcfg, trace)
    violations = trace.monotonicity_violations()
    if violations:
        logger.warning(
            f"total loss rose in {violations} of {len(trace.rows)} rounds"
        )
    return model, trace
