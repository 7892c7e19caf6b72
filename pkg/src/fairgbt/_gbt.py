"""
Second-order gradient boosted regression trees

Imports
-------
dataclasses, time, numpy, scipy.special, numba, loguru

Exports
-------
TreeNode, TreeEnsemble, TrainConfig, sigmoid, logloss_grad_hess, fit_tree,
predict_tree, train_baseline, boost, predict_margin, predict_proba,
mean_logloss
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from loguru import logger
from numba import jit
from scipy.special import expit

from ._errors import DataError

PROB_EPS = 1e-12
HESS_FLOOR = 1e-12
# gains at or below this count as "no gain"
MIN_SPLIT_GAIN = 1e-12
# step halvings tried by the line search before a round is dropped
MAX_HALVINGS = 40


@dataclass
class TreeNode:
    """
    Node of a regression tree

    A leaf has no children and carries value, an internal node routes
    x[feature_index] < threshold to left and everything else to right.

    Attributes
    ----------
    cover : float
        number of training rows that reached the node
    value : float
        margin contribution (leaves only)
    feature_index : int
        -1 for leaves
    threshold : float
    left, right : TreeNode or None
    """

    cover: float
    value: float = 0.0
    feature_index: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self):
        return self.left is None

    def depth(self):
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def scaled(self, factor: float) -> "TreeNode":
        """Copy of the tree with every leaf value multiplied by factor"""
        if self.is_leaf:
            return TreeNode(cover=self.cover, value=self.value * factor)
        return TreeNode(
            cover=self.cover,
            feature_index=self.feature_index,
            threshold=self.threshold,
            left=self.left.scaled(factor),
            right=self.right.scaled(factor),
        )

    def features(self):
        """Set of feature indices used by any split of the tree"""
        if self.is_leaf:
            return set()
        return (
            {self.feature_index}
            | self.left.features()
            | self.right.features()
        )


@dataclass
class TreeEnsemble:
    """
    Additive tree model f(x) = base_margin + learning_rate * sum_t tree_t(x)

    Attributes
    ----------
    trees : list of TreeNode
    learning_rate : float
    base_margin : float
    n_features : int
    """

    trees: List[TreeNode]
    learning_rate: float
    base_margin: float = 0.0
    n_features: int = 0

    def truncate(self, k: int) -> "TreeEnsemble":
        """The ensemble of the first k trees"""
        return TreeEnsemble(
            trees=list(self.trees[:k]),
            learning_rate=self.learning_rate,
            base_margin=self.base_margin,
            n_features=self.n_features,
        )


@dataclass(frozen=True)
class TrainConfig:
    """
    Boosting hyperparameters

    Attributes
    ----------
    rounds : int
        number of boosting rounds T
    learning_rate : float
        shrinkage eta in (0, 1]
    max_depth : int
    min_child_cover : float
        minimum number of rows in each child of a split
    l2_leaf_reg : float
        L2 regularization of the leaf values
    seed : int
        seeds the row subsampling
    subsample : float
        share of rows drawn (without replacement) per round, 1.0 = all
    """

    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_child_cover: float = 1.0
    l2_leaf_reg: float = 1.0
    seed: int = 0
    subsample: float = 1.0

    def __post_init__(self):
        if self.rounds < 1:
            raise DataError(f"rounds must be >= 1, got {self.rounds}")
        if self.max_depth < 1:
            raise DataError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.l2_leaf_reg < 0:
            raise DataError("l2_leaf_reg must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise DataError("learning_rate must be in (0, 1]")
        if not self.min_child_cover > 0:
            raise DataError("min_child_cover must be > 0")
        if not 0.0 < self.subsample <= 1.0:
            raise DataError("subsample must be in (0, 1]")


def sigmoid(margin):
    """
    Logistic function 1 / (1 + exp(-margin)), saturating without overflow

    Parameters
    ----------
    margin : float or ndarray

    Returns
    -------
    float or ndarray
    """

    return expit(margin)


def logloss_grad_hess(p_hat, y):
    """
    Gradient and hessian of the binary logistic loss w.r.t. the margin

    Parameters
    ----------
    p_hat : ndarray
        predicted probabilities, clamped to [1e-12, 1 - 1e-12]
    y : ndarray
        labels in {0, 1}

    Returns
    -------
    (ndarray, ndarray)
        g = p - y and h = p (1 - p) floored at 1e-12
    """

    p_hat = np.asarray(p_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p_hat.shape != y.shape:
        raise DataError(f"length mismatch: {p_hat.shape} vs {y.shape}")
    p = np.clip(p_hat, PROB_EPS, 1.0 - PROB_EPS)
    g = p - y
    h = np.maximum(p * (1.0 - p), HESS_FLOOR)
    return g, h


def mean_logloss(p_hat, y):
    """Mean binary cross-entropy"""
    p = np.clip(np.asarray(p_hat, dtype=np.float64), PROB_EPS, 1 - PROB_EPS)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


@jit(nopython=True)
def best_split_numba(x, g, h, l2_leaf_reg, min_child_cover, min_gain):
    """
    Exact scan over the split points of one sorted feature

    Parameters
    ----------
    x : ndarray
        feature values in ascending order
    g, h : ndarray
        gradients and hessians in the same order
    l2_leaf_reg : float
    min_child_cover : float
    min_gain : float
        a split has to beat this gain

    Returns
    -------
    (gain, threshold, found) : (float, float, bool)
        threshold is the midpoint between consecutive distinct values, or
        the upper value when the midpoint rounds onto the lower one; the
        first (lowest) threshold wins ties
    """

    n = x.shape[0]
    G = 0.0
    H = 0.0
    for i in range(n):
        G += g[i]
        H += h[i]
    parent = G * G / (H + l2_leaf_reg)

    best_gain = min_gain
    best_threshold = 0.0
    found = False
    GL = 0.0
    HL = 0.0
    for i in range(n - 1):
        GL += g[i]
        HL += h[i]
        if x[i] == x[i + 1]:
            continue
        n_left = i + 1
        n_right = n - n_left
        if n_left < min_child_cover or n_right < min_child_cover:
            continue
        GR = G - GL
        HR = H - HL
        gain = 0.5 * (
            GL * GL / (HL + l2_leaf_reg)
            + GR * GR / (HR + l2_leaf_reg)
            - parent
        )
        if gain > best_gain:
            best_gain = gain
            best_threshold = 0.5 * (x[i] + x[i + 1])
            # adjacent doubles: the midpoint may round down onto x[i]
            if best_threshold <= x[i]:
                best_threshold = x[i + 1]
            found = True
    return best_gain, best_threshold, found


def fit_tree(X, g, h, cfg: TrainConfig, sorted_index=None) -> TreeNode:
    """
    Fit one regression tree by greedy exact split search

    Parameters
    ----------
    X : ndarray (m, d)
    g, h : ndarray (m,)
        gradients and hessians of the loss at the current margins
    cfg : TrainConfig
    sorted_index : ndarray (m, d), optional
        np.argsort(X, axis=0, kind='stable'), computed here if not given

    Returns
    -------
    TreeNode
        root; leaf values are -G / (H + l2_leaf_reg)
    """

    X = np.asarray(X, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    m = X.shape[0]
    if g.shape != (m,) or h.shape != (m,):
        raise DataError("X, g and h must have the same number of rows")
    if sorted_index is None:
        sorted_index = np.argsort(X, axis=0, kind="stable")

    l2 = float(cfg.l2_leaf_reg)

    def build(in_node, depth):
        rows = np.flatnonzero(in_node)
        G = float(np.sum(g[rows]))
        H = float(np.sum(h[rows]))
        leaf = TreeNode(cover=float(rows.size), value=-G / (H + l2))
        if depth >= cfg.max_depth or rows.size < 2:
            return leaf

        best_gain = MIN_SPLIT_GAIN
        best_feature = -1
        best_threshold = 0.0
        for f in range(X.shape[1]):
            order = sorted_index[:, f]
            order = order[in_node[order]]
            gain, threshold, found = best_split_numba(
                X[order, f],
                g[order],
                h[order],
                l2,
                float(cfg.min_child_cover),
                best_gain,
            )
            if found:
                best_gain = gain
                best_feature = f
                best_threshold = threshold

        if best_feature < 0:
            return leaf

        goes_left = X[:, best_feature] < best_threshold
        left = build(in_node & goes_left, depth + 1)
        right = build(in_node & ~goes_left, depth + 1)
        return TreeNode(
            cover=leaf.cover,
            feature_index=best_feature,
            threshold=float(best_threshold),
            left=left,
            right=right,
        )

    return build(np.ones(m, dtype=bool), 0)


def predict_tree(node: TreeNode, X) -> np.ndarray:
    """Output of a single tree for every row of X"""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.float64)

    def fill(node, rows):
        if rows.size == 0:
            return
        if node.is_leaf:
            out[rows] = node.value
            return
        goes_left = X[rows, node.feature_index] < node.threshold
        fill(node.left, rows[goes_left])
        fill(node.right, rows[~goes_left])

    fill(node, np.arange(X.shape[0]))
    return out


def predict_margin(model: TreeEnsemble, X) -> np.ndarray:
    """
    Additive margin of the ensemble

    The trees are summed in their training order, so the result for k trees
    equals the result for k - 1 trees plus learning_rate * tree_k(x).

    Parameters
    ----------
    model : TreeEnsemble
    X : ndarray (m, d)

    Returns
    -------
    ndarray (m,)
    """

    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(
            f"model expects {model.n_features} features, X has shape "
            f"{X.shape}"
        )
    margin = np.full(X.shape[0], model.base_margin, dtype=np.float64)
    for tree in model.trees:
        margin = margin + model.learning_rate * predict_tree(tree, X)
    return margin


def predict_proba(model: TreeEnsemble, X) -> np.ndarray:
    """sigmoid of predict_margin"""
    return sigmoid(predict_margin(model, X))


def _backtrack(tree, X, margins, step, line_objective):
    """
    Largest factor 2**-k (k < MAX_HALVINGS) whose step does not raise
    line_objective, 0.0 if none does
    """

    update = step * predict_tree(tree, X)
    current = line_objective(margins)
    factor = 1.0
    for _ in range(MAX_HALVINGS):
        if line_objective(margins + factor * update) <= current:
            return factor
        factor *= 0.5
    return 0.0


def boost(
    X,
    y,
    cfg: TrainConfig,
    extra_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    on_round: Optional[Callable[[int, np.ndarray], None]] = None,
    line_objective: Optional[Callable[[np.ndarray], float]] = None,
) -> TreeEnsemble:
    """
    The boosting loop shared by baseline and fairness-aware training

    Parameters
    ----------
    X : ndarray (m, d)
    y : ndarray (m,)
    cfg : TrainConfig
    extra_gradient : callable, optional
        margins -> per-instance gradient added to the logistic gradient
    on_round : callable, optional
        called as on_round(t, margins) after round t
    line_objective : callable, optional
        margins -> objective value; when given, each tree's leaves are
        halved until the round does not increase it (all zero after
        MAX_HALVINGS failed halvings)

    Returns
    -------
    TreeEnsemble
    """

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m, d = X.shape
    rng = np.random.default_rng(cfg.seed)
    sorted_index = np.argsort(X, axis=0, kind="stable")
    n_sub = max(1, int(round(cfg.subsample * m)))

    model = TreeEnsemble(
        trees=[], learning_rate=cfg.learning_rate, n_features=d
    )
    margins = np.full(m, model.base_margin, dtype=np.float64)
    for t in range(cfg.rounds):
        g, h = logloss_grad_hess(sigmoid(margins), y)
        if extra_gradient is not None:
            g = g + extra_gradient(margins)

        if n_sub < m:
            rows = np.sort(rng.choice(m, size=n_sub, replace=False))
            tree = fit_tree(X[rows], g[rows], h[rows], cfg)
        else:
            tree = fit_tree(X, g, h, cfg, sorted_index=sorted_index)

        if line_objective is not None:
            factor = _backtrack(tree, X, margins, cfg.learning_rate,
                                line_objective)
            if factor != 1.0:
                logger.debug(f"round {t + 1}: step scaled by {factor:g}")
                tree = tree.scaled(factor)

        margins = margins + cfg.learning_rate * predict_tree(tree, X)
        model.trees.append(tree)
        if on_round is not None:
            on_round(t, margins)
    return model


def train_baseline(train, cfg: TrainConfig) -> TreeEnsemble:
    """
    Unconstrained logistic boosting

    Parameters
    ----------
    train : Dataset
        preprocessed training data
    cfg : TrainConfig

    Returns
    -------
    TreeEnsemble
    """

    if not train.preprocessed:
        raise DataError("train_baseline needs a preprocessed dataset")
    start_time = time.time()
    losses = []

    def monitor(t, margins):
        losses.append(mean_logloss(sigmoid(margins), train.y))
        logger.debug(f"round {t + 1}: logloss {losses[-1]:.6f}")

    model = boost(train.X, train.y, cfg, on_round=monitor)
    logger.info(
        f"baseline: {cfg.rounds} rounds, final logloss {losses[-1]:.5f}, "
        f"run time: {round(time.time() - start_time, 2)} seconds"
    )
    return model
