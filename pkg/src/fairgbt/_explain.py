"""
Exact path-dependent TreeSHAP for TreeEnsemble margins and the per-group
attribution disparity of every feature

Imports
-------
dataclasses, time, numpy, loguru

Exports
-------
ShapAttribution, GroupDisparity, treeshap_tree, treeshap_ensemble,
expected_value, mean_abs_ranking, group_disparity, ranking_shift,
attribution_rows, disparity_rows, write_attributions, write_disparity
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from loguru import logger

from ._errors import DataError, NumericalError
from ._gbt import TreeEnsemble, TreeNode
from ._writer import write_table


@dataclass(frozen=True, eq=False)
class ShapAttribution:
    """
    Shapley values of the margin for a batch of instances

    Attributes
    ----------
    phi : ndarray (m, d)
    base_value : float
        expected margin under the cover-weighted training distribution
    feature_names : tuple of str
    """

    phi: np.ndarray
    base_value: float
    feature_names: Tuple[str, ...]

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        if phi.ndim != 2 or phi.shape[1] != len(self.feature_names):
            raise DataError(
                f"phi of shape {phi.shape} does not match "
                f"{len(self.feature_names)} feature names"
            )
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def m(self):
        return self.phi.shape[0]

    def reconstruct(self):
        """base_value + sum_j phi_ij, the margin of every instance"""
        return self.base_value + self.phi.sum(axis=1)


@dataclass(frozen=True, eq=False)
class GroupDisparity:
    """Mean attribution per group and their difference (group 0 - group 1)"""

    delta_phi: np.ndarray
    mean_phi_group0: np.ndarray
    mean_phi_group1: np.ndarray
    feature_names: Tuple[str, ...] = ()

    def as_dict(self):
        return {
            name: {
                "mean_phi_group0": float(self.mean_phi_group0[j]),
                "mean_phi_group1": float(self.mean_phi_group1[j]),
                "delta_phi": float(self.delta_phi[j]),
            }
            for j, name in enumerate(self.feature_names)
        }


def _extend(path, zero_fraction, one_fraction, feature_index):
    depth = len(path)
    path.append([feature_index, zero_fraction, one_fraction,
                 1.0 if depth == 0 else 0.0])
    for i in range(depth - 1, -1, -1):
        path[i + 1][3] += one_fraction * path[i][3] * (i + 1) / (depth + 1)
        path[i][3] = zero_fraction * path[i][3] * (depth - i) / (depth + 1)


def _unwind(path, k):
    depth = len(path) - 1
    _, zero_fraction, one_fraction, _ = path[k]
    next_one = path[depth][3]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = path[i][3]
            path[i][3] = next_one * (depth + 1) / ((i + 1) * one_fraction)
            next_one = tmp - path[i][3] * zero_fraction * (depth - i) / (
                depth + 1
            )
        else:
            path[i][3] = (
                path[i][3] * (depth + 1) / (zero_fraction * (depth - i))
            )
    for i in range(k, depth):
        path[i][0:3] = path[i + 1][0:3]
    path.pop()


def _unwound_sum(path, k):
    depth = len(path) - 1
    _, zero_fraction, one_fraction, _ = path[k]
    next_one = path[depth][3]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = next_one * (depth + 1) / ((i + 1) * one_fraction)
            total += tmp
            next_one = path[i][3] - tmp * zero_fraction * (
                (depth - i) / (depth + 1)
            )
        else:
            total += (path[i][3] / zero_fraction) / (
                (depth - i) / (depth + 1)
            )
    return total


def _check_covers(node: TreeNode):
    if not node.cover > 0:
        raise NumericalError(
            f"tree node with cover {node.cover}: corrupt model"
        )
    if not node.is_leaf:
        _check_covers(node.left)
        _check_covers(node.right)


def _expected(node: TreeNode):
    if node.is_leaf:
        return node.value
    return (
        node.left.cover * _expected(node.left)
        + node.right.cover * _expected(node.right)
    ) / (node.left.cover + node.right.cover)


def _recurse(node, x, phi, parent_path, zero_fraction, one_fraction,
             feature_index):
    path = [list(element) for element in parent_path]
    _extend(path, zero_fraction, one_fraction, feature_index)

    if node.is_leaf:
        for k in range(1, len(path)):
            weight = _unwound_sum(path, k)
            feature, zero, one, _ = path[k]
            phi[feature] += weight * (one - zero) * node.value
        return

    if x[node.feature_index] < node.threshold:
        hot, cold = node.left, node.right
    else:
        hot, cold = node.right, node.left

    incoming_zero = 1.0
    incoming_one = 1.0
    for k in range(1, len(path)):
        if path[k][0] == node.feature_index:
            incoming_zero, incoming_one = path[k][1], path[k][2]
            _unwind(path, k)
            break

    _recurse(hot, x, phi, path, hot.cover / node.cover * incoming_zero,
             incoming_one, node.feature_index)
    _recurse(cold, x, phi, path, cold.cover / node.cover * incoming_zero,
             0.0, node.feature_index)


def expected_value(tree: TreeNode) -> float:
    """Cover-weighted mean leaf value of a tree"""
    _check_covers(tree)
    return float(_expected(tree))


def treeshap_tree(tree: TreeNode, x, n_features=None):
    """
    Exact Shapley values of one tree's output at x

    The value function of a coalition S is the cover-weighted expectation
    of the tree output with the features in S fixed to x.

    Parameters
    ----------
    tree : TreeNode
        root; every node needs a positive cover
    x : ndarray (d,)
    n_features : int, optional
        length of phi, defaults to len(x)

    Returns
    -------
    (phi, base) : (ndarray (d,), float)
        base + phi.sum() equals the tree output at x
    """

    x = np.asarray(x, dtype=np.float64)
    base = expected_value(tree)
    phi = np.zeros(len(x) if n_features is None else n_features)
    if not tree.is_leaf:
        _recurse(tree, x, phi, [], 1.0, 1.0, -1)
    return phi, base


def treeshap_ensemble(model: TreeEnsemble, X, feature_names=None):
    """
    TreeSHAP of the ensemble margin for every row of X

    Parameters
    ----------
    model : TreeEnsemble
    X : ndarray (m, d)
    feature_names : sequence of str, optional

    Returns
    -------
    ShapAttribution
        phi = learning_rate * sum of per-tree phi, base_value = base_margin
        + learning_rate * sum of per-tree expected values
    """

    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(
            f"model expects {model.n_features} features, X has shape "
            f"{X.shape}"
        )
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(model.n_features)]
    start_time = time.time()

    d = model.n_features
    phi = np.zeros(X.shape)
    base = 0.0
    for tree in model.trees:
        base += expected_value(tree)
        if tree.is_leaf:
            continue
        tree_phi = np.zeros(X.shape)
        for i in range(X.shape[0]):
            _recurse(tree, X[i], tree_phi[i], [], 1.0, 1.0, -1)
        phi += tree_phi
    phi *= model.learning_rate

    logger.debug(
        f"treeshap: {X.shape[0]} rows x {len(model.trees)} trees, "
        f"run time: {round(time.time() - start_time, 2)} seconds"
    )
    return ShapAttribution(
        phi=phi.reshape(-1, d),
        base_value=model.base_margin + model.learning_rate * base,
        feature_names=tuple(feature_names),
    )


def _mean_abs(attr: ShapAttribution):
    if attr.m < 1:
        raise DataError("ranking needs at least one instance")
    return np.mean(np.abs(attr.phi), axis=0)


def mean_abs_ranking(attr: ShapAttribution) -> List[str]:
    """Feature names by mean |phi| descending, ties by feature index"""
    score = _mean_abs(attr)
    order = sorted(range(len(score)), key=lambda j: (-score[j], j))
    return [attr.feature_names[j] for j in order]


def group_disparity(attr: ShapAttribution, a) -> GroupDisparity:
    """
    Per-feature mean attribution of each sensitive group

    Parameters
    ----------
    attr : ShapAttribution
    a : ndarray (m,)
        sensitive attribute aligned with the rows of attr.phi

    Returns
    -------
    GroupDisparity
    """

    a = np.asarray(a)
    if a.shape != (attr.m,):
        raise DataError("a must be aligned with the attribution rows")
    g0 = a == 0
    g1 = a == 1
    if not g0.any() or not g1.any():
        raise DataError("group disparity needs both sensitive groups")
    mean0 = attr.phi[g0].mean(axis=0)
    mean1 = attr.phi[g1].mean(axis=0)
    return GroupDisparity(
        delta_phi=mean0 - mean1,
        mean_phi_group0=mean0,
        mean_phi_group1=mean1,
        feature_names=attr.feature_names,
    )


def ranking_shift(pre: ShapAttribution, post: ShapAttribution):
    """
    1-based mean |phi| rank of every feature before and after mitigation

    Returns
    -------
    dict
        feature -> (rank_pre, rank_post), in feature order
    """

    if pre.feature_names != post.feature_names:
        raise DataError("attributions cover different features")
    rank_pre = {f: r + 1 for r, f in enumerate(mean_abs_ranking(pre))}
    rank_post = {f: r + 1 for r, f in enumerate(mean_abs_ranking(post))}
    return {f: (rank_pre[f], rank_post[f]) for f in pre.feature_names}


def attribution_rows(attr: ShapAttribution):
    """Header and one row per instance: phi per feature, then base_value"""
    header = list(attr.feature_names) + ["base_value"]
    rows = [[float(v) for v in row] + [attr.base_value] for row in attr.phi]
    return header, rows


def disparity_rows(attr: ShapAttribution, disparity: GroupDisparity):
    """Header and one row per feature, sorted by mean |phi| descending"""
    score = _mean_abs(attr)
    order = sorted(range(len(score)), key=lambda j: (-score[j], j))
    header = ["feature", "mean_phi_group0", "mean_phi_group1", "delta_phi",
              "mean_abs_phi"]
    rows = [
        [
            attr.feature_names[j],
            float(disparity.mean_phi_group0[j]),
            float(disparity.mean_phi_group1[j]),
            float(disparity.delta_phi[j]),
            float(score[j]),
        ]
        for j in order
    ]
    return header, rows


def write_attributions(attr: ShapAttribution, path):
    write_table(path, *attribution_rows(attr))


def write_disparity(attr: ShapAttribution, disparity: GroupDisparity, path):
    write_table(path, *disparity_rows(attr, disparity))
