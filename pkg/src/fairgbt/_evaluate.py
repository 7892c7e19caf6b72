"""
Predictive performance, pre/post comparison and report emission

Imports
-------
dataclasses, math, pathlib, numpy, scipy.stats, loguru

Exports
-------
EvalResult, Stage, ComparisonReport, auc_roc, accuracy, evaluate, compare,
reduction, collapse_orders, emit_report, render_table, REPORT_SCHEMA_VERSION
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.stats import rankdata

from ._errors import DataError
from ._fair_training import FairnessConfig
from ._fairness_metrics import FairnessSnapshot
from ._writer import json_text, write_file

REPORT_SCHEMA_VERSION = 1
REDUCED_METRICS = ("spd", "theil", "theil_normalized", "wasserstein")
# a drop of at least this many orders of magnitude counts as a collapse
COLLAPSE_ORDERS = 2.0


@dataclass(frozen=True)
class EvalResult:
    """
    Predictive performance on one partition

    Attributes
    ----------
    auc_roc : float
    accuracy : float
    threshold : float
    m : int
    """

    auc_roc: float
    accuracy: float
    threshold: float
    m: int

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(
            auc_roc=float(d["auc_roc"]),
            accuracy=float(d["accuracy"]),
            threshold=float(d["threshold"]),
            m=int(d["m"]),
        )


@dataclass(frozen=True)
class Stage:
    """Fairness and performance of one model on the test partition"""

    fairness: FairnessSnapshot
    performance: EvalResult

    def to_dict(self):
        return {
            "fairness": self.fairness.to_dict(),
            "performance": self.performance.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            fairness=FairnessSnapshot.from_dict(d["fairness"]),
            performance=EvalResult.from_dict(d["performance"]),
        )


def _plain(value):
    """JSON-shaped copy: tuples to lists, numpy scalars to Python"""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


@dataclass
class ComparisonReport:
    """
    Pre- and post-mitigation metrics of one cohort

    Attributes
    ----------
    cohort_name : str
    pre, post : Stage
    theta_star : FairnessConfig
    reductions : dict
        metric -> relative reduction (|pre| - |post|) / |pre|, None when
        the pre value is 0
    theil_collapse_orders : float or None
        log10(pre.theil / post.theil)
    theil_collapsed : bool
        at least COLLAPSE_ORDERS orders of magnitude
    auc_drop : float
        pre AUC - post AUC
    explanations : dict
        SHAP group disparities and rankings of both models
    artifacts : dict
        file references (BO history, training trace, SHAP exports, models)
    provenance : dict
        seeds, configs, search space and dataset hash
    """

    cohort_name: str
    pre: Stage
    post: Stage
    theta_star: FairnessConfig
    reductions: Dict[str, Optional[float]]
    theil_collapse_orders: Optional[float]
    theil_collapsed: bool
    auc_drop: float
    explanations: Dict[str, Any] = field(default_factory=dict)
    artifacts: Dict[str, Any] = field(default_factory=dict)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.reductions = _plain(self.reductions)
        self.explanations = _plain(self.explanations)
        self.artifacts = _plain(self.artifacts)
        self.provenance = _plain(self.provenance)

    def to_dict(self):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "cohort": self.cohort_name,
            "pre": self.pre.to_dict(),
            "post": self.post.to_dict(),
            "theta_star": self.theta_star.to_dict(),
            "reductions": dict(
                self.reductions,
                auc_drop=self.auc_drop,
                theil_collapse_orders=self.theil_collapse_orders,
                theil_collapsed=self.theil_collapsed,
            ),
            "explanations": self.explanations,
            "artifacts": self.artifacts,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d):
        version = d.get("schema_version")
        if version != REPORT_SCHEMA_VERSION:
            raise DataError(f"unsupported report schema version {version}")
        reductions = dict(d["reductions"])
        auc_drop = float(reductions.pop("auc_drop"))
        orders = reductions.pop("theil_collapse_orders")
        collapsed = bool(reductions.pop("theil_collapsed"))
        return cls(
            cohort_name=d["cohort"],
            pre=Stage.from_dict(d["pre"]),
            post=Stage.from_dict(d["post"]),
            theta_star=FairnessConfig.from_dict(d["theta_star"]),
            reductions={
                k: None if v is None else float(v)
                for k, v in reductions.items()
            },
            theil_collapse_orders=None if orders is None else float(orders),
            theil_collapsed=collapsed,
            auc_drop=auc_drop,
            explanations=d.get("explanations", {}),
            artifacts=d.get("artifacts", {}),
            provenance=d.get("provenance", {}),
        )


def auc_roc(p_hat, y) -> float:
    """
    Area under the ROC curve from the Mann-Whitney rank statistic

    Tied scores contribute 1/2.

    Parameters
    ----------
    p_hat : ndarray
    y : ndarray of 0/1

    Returns
    -------
    float
    """

    p_hat = np.asarray(p_hat, dtype=np.float64)
    y = np.asarray(y)
    if p_hat.shape != y.shape:
        raise DataError("p_hat and y must be aligned")
    positive = y == 1
    n1 = int(positive.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise DataError("AUC is undefined for a single label class")
    ranks = rankdata(p_hat, method="average")
    u = float(np.sum(ranks[positive])) - n1 * (n1 + 1) / 2.0
    return u / (n1 * n0)


def accuracy(p_hat, y, threshold: float = 0.5) -> float:
    """Share of rows where [p_hat >= threshold] equals the label"""
    p_hat = np.asarray(p_hat, dtype=np.float64)
    y = np.asarray(y)
    if p_hat.shape != y.shape:
        raise DataError("p_hat and y must be aligned")
    return float(np.mean((p_hat >= threshold).astype(np.int64) == y))


def evaluate(p_hat, y, threshold: float = 0.5) -> EvalResult:
    """AUC and accuracy of one set of predictions"""
    return EvalResult(
        auc_roc=auc_roc(p_hat, y),
        accuracy=accuracy(p_hat, y, threshold),
        threshold=float(threshold),
        m=int(np.size(y)),
    )


def reduction(pre: float, post: float) -> Optional[float]:
    """(|pre| - |post|) / |pre|, None when pre is 0; never clipped"""
    if pre == 0:
        return None
    return (abs(pre) - abs(post)) / abs(pre)


def collapse_orders(pre: float, post: float) -> Optional[float]:
    """Orders of magnitude between |pre| and |post|"""
    if pre == 0 or post == 0:
        return None
    return math.log10(abs(pre) / abs(post))


def compare(pre: Stage, post: Stage, meta: Mapping[str, Any]):
    """
    Build the comparison report of one cohort

    Parameters
    ----------
    pre, post : Stage
        baseline and mitigated model on the same test partition
    meta : mapping
        'cohort', 'theta_star' (FairnessConfig) and optionally
        'explanations', 'artifacts', 'provenance'

    Returns
    -------
    ComparisonReport
    """

    if pre.performance.m != post.performance.m:
        raise DataError("pre and post were computed on different partitions")

    reductions = {
        name: reduction(
            getattr(pre.fairness, name), getattr(post.fairness, name)
        )
        for name in REDUCED_METRICS
    }
    orders = collapse_orders(pre.fairness.theil, post.fairness.theil)
    return ComparisonReport(
        cohort_name=str(meta["cohort"]),
        pre=pre,
        post=post,
        theta_star=meta["theta_star"],
        reductions=reductions,
        theil_collapse_orders=orders,
        theil_collapsed=orders is not None and orders >= COLLAPSE_ORDERS,
        auc_drop=pre.performance.auc_roc - post.performance.auc_roc,
        explanations=meta.get("explanations", {}),
        artifacts=meta.get("artifacts", {}),
        provenance=meta.get("provenance", {}),
    )


def _pct(x):
    return "n/a" if x is None else f"{100.0 * x:.1f}%"


def _stage_cells(stage: Stage):
    f = stage.fairness
    return [
        f"{100.0 * f.rate_group0:.2f}",
        f"{100.0 * f.rate_group1:.2f}",
        f"{f.spd:.4f}",
        f"{f.theil:.4g}",
        f"{f.wasserstein:.4f}",
        f"{stage.performance.auc_roc:.4f}",
    ]


def render_table(
    reports: Sequence[ComparisonReport],
    groups: Optional[Mapping[str, Sequence[str]]] = None,
) -> str:
    """
    Text table with one row per cohort: group positive-prediction rates,
    SPD, Theil, Wasserstein and AUC before and after mitigation, then the
    relative reductions

    Parameters
    ----------
    reports : sequence of ComparisonReport
    groups : mapping, optional
        section title -> cohort names, rendered as section rows

    Returns
    -------
    str
    """

    stage_head = ["G0 pred %", "G1 pred %", "SPD", "Theil", "W", "AUC"]
    header = (
        ["Cohort"]
        + [f"pre {h}" for h in stage_head]
        + [f"post {h}" for h in stage_head]
        + ["dSPD", "dW", "Theil orders"]
    )

    def row(r):
        orders = r.theil_collapse_orders
        return (
            [r.cohort_name]
            + _stage_cells(r.pre)
            + _stage_cells(r.post)
            + [
                _pct(r.reductions.get("spd")),
                _pct(r.reductions.get("wasserstein")),
                "n/a" if orders is None else f"{orders:.2f}",
            ]
        )

    by_name = {r.cohort_name: r for r in reports}
    lines: List[List[str]] = []
    if groups:
        placed = set()
        for title, names in groups.items():
            lines.append([f"[{title}]"])
            for name in names:
                if name in by_name:
                    lines.append(row(by_name[name]))
                    placed.add(name)
        rest = [r for r in reports if r.cohort_name not in placed]
        if rest:
            lines.append(["[other]"])
            lines.extend(row(r) for r in rest)
    else:
        lines.extend(row(r) for r in reports)

    widths = [len(h) for h in header]
    for cells in lines:
        if len(cells) == len(header):
            widths = [max(w, len(c)) for w, c in zip(widths, cells)]

    def fmt(cells):
        if len(cells) != len(header):
            return cells[0]
        first = cells[0].ljust(widths[0])
        rest = (c.rjust(w) for c, w in zip(cells[1:], widths[1:]))
        return "  ".join([first, *rest]).rstrip()

    out = [fmt(header), "-" * len(fmt(header))]
    out.extend(fmt(cells) for cells in lines)
    return "\n".join(out) + "\n"


def emit_report(r: ComparisonReport, path) -> List[Path]:
    """
    Write the JSON report and its text table

    Parameters
    ----------
    r : ComparisonReport
    path : str or Path
        JSON file; the table goes next to it with suffix .txt

    Returns
    -------
    list of Path
        the written files
    """

    path = Path(path)
    table_path = path.with_suffix(".txt")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_file(path, json_text(r.to_dict()), newline=False)
        title = f"Fairness metrics pre/post mitigation: {r.cohort_name}\n\n"
        write_file(table_path, title + render_table([r]), newline=False)
    except OSError as err:
        logger.error(f"cannot write report to {path}: {err}")
        raise
    return [path, table_path]
