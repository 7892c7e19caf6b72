"""
Gaussian-process Bayesian optimization of the fairness hyperparameters
theta = (lambda, w1, w2, w3)

Search happens in the unit cube; lambda is mapped on a log scale, the weights
linearly. Every trial scores J = alpha * mean AUC - (1 - alpha) * mean soft
L_fair over stratified validation folds, L_fair weighted by the fixed
SearchSpace.score_weights.

Imports
-------
dataclasses, time, concurrent.futures, numpy, scipy.linalg, scipy.optimize,
scipy.stats, sklearn.model_selection, loguru

Exports
-------
SearchSpace, Trial, GPSurrogate, objective_J, gp_fit, expected_improvement,
ei_closed_form, propose_next, optimize, history_rows
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.stats import norm, qmc
from sklearn.model_selection import StratifiedKFold

from ._errors import DataError, NumericalError
from ._evaluate import auc_roc
from ._fair_training import FairnessConfig, train_fair
from ._fairness_metrics import SOFT, GroupView, fairness_loss
from ._gbt import TrainConfig, predict_proba

N_CANDIDATES = 2048
SIGMA_FLOOR = 1e-12
JITTER_START = 1e-8
JITTER_MAX = 1e-4
COLLISION_STEP = 1e-6
N_RESTARTS = 4
DIM = 4


@dataclass(frozen=True)
class SearchSpace:
    """
    Bounds and budget of the theta search

    Attributes
    ----------
    lambda_bounds : (float, float)
        searched on a log scale
    weight_bounds : (float, float)
        shared by w1, w2, w3
    alpha : float
        weight of AUC against L_fair in J
    budget : int
        total number of trials K
    init_points : int
        Latin hypercube trials before the GP takes over
    seed : int
    score_weights : (float, float, float)
        fixed weights of |SPD|, Theil and W in the L_fair that J scores
        every trial with, independent of the trial's own w1, w2, w3
    """

    lambda_bounds: Tuple[float, float] = (1e-3, 1e2)
    weight_bounds: Tuple[float, float] = (0.0, 1.0)
    alpha: float = 0.5
    budget: int = 25
    init_points: int = 5
    seed: int = 0
    score_weights: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        lo, hi = map(float, self.lambda_bounds)
        if not 0.0 < lo < hi:
            raise DataError(f"lambda bounds must satisfy 0 < lo < hi, "
                            f"got {self.lambda_bounds}")
        w_lo, w_hi = map(float, self.weight_bounds)
        if not 0.0 <= w_lo < w_hi <= 1.0:
            raise DataError("weight bounds must lie in [0, 1] with lo < hi")
        if not 0.0 < self.alpha < 1.0:
            raise DataError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.init_points < 2 or self.budget < self.init_points:
            raise DataError(
                "need budget >= init_points >= 2, got "
                f"budget={self.budget}, init_points={self.init_points}"
            )
        object.__setattr__(self, "lambda_bounds", (lo, hi))
        object.__setattr__(self, "weight_bounds", (w_lo, w_hi))
        scores = tuple(float(w) for w in self.score_weights)
        if len(scores) != 3 or min(scores) < 0 or not any(scores):
            raise DataError(
                "score_weights needs 3 nonnegative values, not all zero, "
                f"got {self.score_weights}"
            )
        object.__setattr__(self, "score_weights", scores)

    def to_natural(self, u) -> Tuple[float, float, float, float]:
        """Unit-cube point -> (lambda, w1, w2, w3)"""
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        lo, hi = self.lambda_bounds
        lam = math.exp(math.log(lo) + u[0] * (math.log(hi) - math.log(lo)))
        w_lo, w_hi = self.weight_bounds
        weights = [w_lo + float(v) * (w_hi - w_lo) for v in u[1:]]
        return (lam, *weights)

    def to_unit(self, theta) -> np.ndarray:
        """(lambda, w1, w2, w3) -> unit-cube point"""
        lam, *weights = map(float, theta)
        lo, hi = self.lambda_bounds
        w_lo, w_hi = self.weight_bounds
        u = [(math.log(lam) - math.log(lo)) / (math.log(hi) - math.log(lo))]
        u += [(w - w_lo) / (w_hi - w_lo) for w in weights]
        return np.asarray(u)

    def to_dict(self):
        return {
            "lambda_bounds": list(self.lambda_bounds),
            "weight_bounds": list(self.weight_bounds),
            "alpha": self.alpha,
            "budget": self.budget,
            "init_points": self.init_points,
            "seed": self.seed,
            "score_weights": list(self.score_weights),
        }


@dataclass(frozen=True)
class Trial:
    """
    One evaluation of J

    Attributes
    ----------
    theta : tuple of 4 floats
        unit-cube coordinates
    params : tuple of 4 floats
        (lambda, w1, w2, w3)
    j_value : float
    fold_scores : tuple of (auc, soft L_fair or None)
        None marks a fold whose validation part holds a single group
    k : int
        position in the search history
    """

    theta: Tuple[float, ...]
    params: Tuple[float, ...]
    j_value: float
    fold_scores: Tuple[Tuple[float, Optional[float]], ...] = ()
    k: int = 0

    @property
    def skipped_folds(self):
        return sum(1 for _, lf in self.fold_scores if lf is None)

    @property
    def mean_auc(self):
        if not self.fold_scores:
            return None
        return float(np.mean([auc for auc, _ in self.fold_scores]))

    @property
    def mean_lfair(self):
        values = [lf for _, lf in self.fold_scores if lf is not None]
        if not values:
            return None
        return float(np.mean(values))


def _fold_score(train, fit_index, val_index, tcfg, fcfg, score_weights):
    model = train_fair(train.take(fit_index), tcfg, fcfg)
    val = train.take(val_index)
    p = predict_proba(model, val.X)
    auc = auc_roc(p, val.y)
    if val.a.min() == val.a.max():
        return auc, None
    penalty = fairness_loss(
        GroupView(p, val.a),
        *score_weights,
        mode=SOFT,
        theil_normalized=fcfg.theil_normalized,
    )
    return auc, penalty


def objective_J(
    train,
    theta,
    tcfg: TrainConfig,
    folds: int = 5,
    alpha: float = 0.5,
    seed: int = 0,
    threads: int = 1,
    theil_normalized: bool = True,
    score_weights: Sequence[float] = (1.0, 1.0, 1.0),
) -> Trial:
    """
    k-fold cross-validated J(theta) = alpha * AUC - (1 - alpha) * L_fair

    Parameters
    ----------
    train : Dataset
        preprocessed training partition
    theta : 4-vector
        (lambda, w1, w2, w3)
    tcfg : TrainConfig
    folds : int
        >= 2, stratified on the (a, y) cell
    alpha : float
    seed : int
        seeds the fold assignment
    threads : int
        folds trained concurrently
    theil_normalized : bool
    score_weights : 3 floats
        weights of |SPD|, Theil and W in the validation L_fair; theta's own
        weights only shape the training penalty

    Returns
    -------
    Trial
        theta and params both hold the natural theta; optimize rewrites
        theta to unit coordinates
    """

    if folds < 2:
        raise DataError(f"folds must be >= 2, got {folds}")
    lam, w1, w2, w3 = map(float, theta)
    fcfg = FairnessConfig(lam=lam, w1=w1, w2=w2, w3=w3,
                          theil_normalized=theil_normalized)
    cells = 2 * train.a + train.y
    splitter = StratifiedKFold(n_splits=folds, shuffle=True,
                               random_state=seed)
    try:
        assignment = list(splitter.split(np.zeros(train.m), cells))
    except ValueError as err:
        raise DataError(f"cannot build {folds} folds: {err}") from err

    start_time = time.time()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(
                pool.map(
                    lambda idx: _fold_score(
                        train, idx[0], idx[1], tcfg, fcfg, score_weights
                    ),
                    assignment,
                )
            )
    else:
        scores = [
            _fold_score(train, fit, val, tcfg, fcfg, score_weights)
            for fit, val in assignment
        ]

    skipped = [k for k, (_, lf) in enumerate(scores) if lf is None]
    if skipped:
        logger.warning(
            f"folds {skipped} hold a single sensitive group; "
            "their L_fair is skipped"
        )
    penalties = [lf for _, lf in scores if lf is not None]
    mean_auc = float(np.mean([auc for auc, _ in scores]))
    mean_lfair = float(np.mean(penalties)) if penalties else 0.0
    j_value = alpha * mean_auc - (1.0 - alpha) * mean_lfair
    logger.debug(
        f"J{fcfg.theta} = {j_value:.6f} (auc {mean_auc:.4f}, "
        f"L_fair {mean_lfair:.6f}), "
        f"run time: {round(time.time() - start_time, 2)} seconds"
    )
    natural = (lam, w1, w2, w3)
    return Trial(theta=natural, params=natural, j_value=j_value,
                 fold_scores=tuple(scores))


def _kernel(A, B, length_scales, signal):
    diff = (A[:, None, :] - B[None, :, :]) / length_scales
    return signal * np.exp(-0.5 * np.sum(diff * diff, axis=-1))


def _cholesky(K):
    n = K.shape[0]
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        f"kernel matrix not positive definite with jitter {JITTER_MAX}"
    )


@dataclass
class GPSurrogate:
    """
    Gaussian process with an ARD squared-exponential kernel over the unit
    cube, fitted to standardized J values

    Attributes
    ----------
    X : ndarray (n, 4)
        observed unit-cube points
    y : ndarray (n,)
        observed J values
    length_scales : ndarray (4,)
    signal : float
        signal variance (standardized units)
    noise : float
        noise variance (standardized units)
    """

    X: np.ndarray
    y: np.ndarray
    length_scales: np.ndarray
    signal: float
    noise: float
    y_mean: float = 0.0
    y_std: float = 1.0
    jitter: float = JITTER_START
    _chol: np.ndarray = field(init=False, default=None, repr=False)
    _weights: np.ndarray = field(init=False, default=None, repr=False)

    def __post_init__(self):
        z = (self.y - self.y_mean) / self.y_std
        K = _kernel(self.X, self.X, self.length_scales, self.signal)
        K[np.diag_indices_from(K)] += self.noise
        self._chol, self.jitter = _cholesky(K)
        self._weights = cho_solve((self._chol, True), z)

    @property
    def noise_std(self):
        """Noise standard deviation in J units"""
        return math.sqrt(self.noise) * self.y_std

    def predict(self, U):
        """
        Posterior mean and standard deviation of the latent J

        Parameters
        ----------
        U : ndarray (q, 4) or (4,)

        Returns
        -------
        (mu, sigma) : ndarrays (q,), sigma >= 0
        """

        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        k_star = _kernel(U, self.X, self.length_scales, self.signal)
        mu = k_star @ self._weights
        v = solve_triangular(self._chol, k_star.T, lower=True)
        var = np.maximum(self.signal - np.sum(v * v, axis=0), 0.0)
        return mu * self.y_std + self.y_mean, np.sqrt(var) * self.y_std


def _neg_log_likelihood(log_params, X, z):
    length_scales = np.exp(log_params[:DIM])
    signal = math.exp(log_params[DIM])
    noise = math.exp(log_params[DIM + 1])
    K = _kernel(X, X, length_scales, signal)
    K[np.diag_indices_from(K)] += noise + JITTER_START
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return 1e25
    alpha = cho_solve((L, True), z)
    return float(
        0.5 * z @ alpha
        + np.sum(np.log(np.diag(L)))
        + 0.5 * len(z) * math.log(2.0 * math.pi)
    )


# log bounds: length scales in unit-cube widths, then signal and noise
_LOG_BOUNDS = (
    [(math.log(1e-1), math.log(1e1))] * DIM
    + [(math.log(1e-2), math.log(1e2)), (math.log(1e-6), math.log(1e-1))]
)


def gp_fit(trials: Sequence[Trial], space: SearchSpace) -> GPSurrogate:
    """
    Fit the GP surrogate to the trial history

    Length scales, signal and noise variance maximize the log marginal
    likelihood; Nelder-Mead runs from a fixed grid of starting points plus
    seeded random restarts.

    Parameters
    ----------
    trials : sequence of Trial
        at least 2, theta in unit-cube coordinates
    space : SearchSpace

    Returns
    -------
    GPSurrogate
    """

    if len(trials) < 2:
        raise DataError("gp_fit needs at least 2 trials")
    X = np.asarray([t.theta for t in trials], dtype=np.float64)
    y = np.asarray([t.j_value for t in trials], dtype=np.float64)
    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if not y_std > 0:
        y_std = 1.0
    z = (y - y_mean) / y_std

    starts = [
        np.array([math.log(ls)] * DIM + [0.0, math.log(noise)])
        for ls in (0.1, 0.3, 1.0)
        for noise in (1e-4, 1e-2)
    ]
    rng = np.random.default_rng(space.seed + len(trials))
    lows = np.array([b[0] for b in _LOG_BOUNDS])
    highs = np.array([b[1] for b in _LOG_BOUNDS])
    starts += [rng.uniform(lows, highs) for _ in range(N_RESTARTS)]

    best_value = np.inf
    best = starts[0]
    for x0 in starts:
        result = minimize(
            _neg_log_likelihood,
            x0,
            args=(X, z),
            method="Nelder-Mead",
            bounds=_LOG_BOUNDS,
            options={"maxiter": 400, "xatol": 1e-4, "fatol": 1e-6},
        )
        if result.fun < best_value:
            best_value = result.fun
            best = result.x

    return GPSurrogate(
        X=X,
        y=y,
        length_scales=np.exp(best[:DIM]),
        signal=math.exp(best[DIM]),
        noise=math.exp(best[DIM + 1]),
        y_mean=y_mean,
        y_std=y_std,
    )


def ei_closed_form(mu, sigma, j_best):
    """
    Expected improvement for maximization
    (mu - j_best) Phi(z) + sigma phi(z), z = (mu - j_best) / sigma;
    0 wherever sigma < 1e-12
    """

    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    safe = np.where(sigma < SIGMA_FLOOR, 1.0, sigma)
    improvement = mu - j_best
    z = improvement / safe
    ei = improvement * norm.cdf(z) + safe * norm.pdf(z)
    return np.where(sigma < SIGMA_FLOOR, 0.0, np.maximum(ei, 0.0))


def expected_improvement(gp: GPSurrogate, theta, j_best: float):
    """
    EI of the GP posterior at one unit-cube point (float) or at every row
    of a matrix of points (ndarray)
    """

    theta = np.asarray(theta, dtype=np.float64)
    mu, sigma = gp.predict(theta)
    ei = ei_closed_form(mu, sigma, j_best)
    if theta.ndim == 1:
        return float(ei[0])
    return ei


def propose_next(gp: GPSurrogate, space: SearchSpace) -> np.ndarray:
    """
    Unit-cube point maximizing EI over 2048 scrambled Sobol candidates

    The candidate set is seeded by space.seed and the number of
    observations; the first candidate wins ties. A proposal equal to an
    observed point is moved by 1e-6.
    """

    sampler = qmc.Sobol(d=DIM, scramble=True, seed=space.seed + len(gp.y))
    candidates = sampler.random_base2(int(math.log2(N_CANDIDATES)))
    ei = expected_improvement(gp, candidates, float(np.max(gp.y)))
    best = candidates[int(np.argmax(ei))].copy()

    step = np.where(best + COLLISION_STEP <= 1.0, COLLISION_STEP,
                    -COLLISION_STEP)
    while np.any(np.all(gp.X == best, axis=1)):
        best = best + step
    return best


def optimize(
    train,
    space: SearchSpace,
    tcfg: TrainConfig,
    folds: int = 5,
    threads: int = 1,
    theil_normalized: bool = True,
    objective: Optional[Callable[[np.ndarray], float]] = None,
):
    """
    Bayesian optimization of theta

    init_points Latin hypercube trials, then budget - init_points trials at
    the EI maximizer of the refitted GP.

    Parameters
    ----------
    train : Dataset
        preprocessed training partition (unused when objective is given)
    space : SearchSpace
    tcfg : TrainConfig
    folds, threads, theil_normalized
        passed to objective_J
    objective : callable, optional
        unit-cube point -> J, replaces objective_J

    Returns
    -------
    (theta_star, history) : (tuple of 4 floats, list of Trial)
        theta_star is the natural theta of the best trial, the first one
        on ties
    """

    start_time = time.time()
    history: List[Trial] = []

    def evaluate(u):
        params = space.to_natural(u)
        k = len(history)
        if objective is None:
            trial = objective_J(
                train,
                params,
                tcfg,
                folds=folds,
                alpha=space.alpha,
                seed=space.seed,
                threads=threads,
                theil_normalized=theil_normalized,
                score_weights=space.score_weights,
            )
            fold_scores = trial.fold_scores
            j_value = trial.j_value
        else:
            fold_scores = ()
            j_value = float(objective(np.asarray(u)))
        history.append(
            Trial(
                theta=tuple(float(v) for v in u),
                params=tuple(params),
                j_value=j_value,
                fold_scores=fold_scores,
                k=k,
            )
        )
        logger.info(
            f"trial {k + 1}/{space.budget}: lambda={params[0]:.4g} "
            f"w=({params[1]:.3f}, {params[2]:.3f}, {params[3]:.3f}) "
            f"J={j_value:.6f}"
        )

    design = qmc.LatinHypercube(d=DIM, seed=space.seed).random(
        space.init_points
    )
    for u in design:
        evaluate(u)
    for _ in range(space.budget - space.init_points):
        gp = gp_fit(history, space)
        evaluate(propose_next(gp, space))

    best = max(history, key=lambda t: (t.j_value, -t.k))
    logger.info(
        f"theta* = {best.params} (J={best.j_value:.6f}) after "
        f"{len(history)} trials, "
        f"run time: {round(time.time() - start_time, 2)} seconds"
    )
    return best.params, history


def history_rows(history: Sequence[Trial]):
    """Header and one csv row per trial"""
    header = ["k", "lambda", "w1", "w2", "w3", "mean_auc", "mean_Lfair", "J"]
    rows = []
    for t in history:
        mean_auc = t.mean_auc
        mean_lfair = t.mean_lfair
        rows.append(
            [t.k, *t.params,
             "" if mean_auc is None else mean_auc,
             "" if mean_lfair is None else mean_lfair,
             t.j_value]
        )
    return header, rows
