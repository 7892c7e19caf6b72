"""
Tabular cohorts with a binary sensitive attribute

Imports
-------
dataclasses, hashlib, numpy, sklearn.model_selection, loguru

Exports
-------
FeatureSchema, LoadReport, Dataset, SplitPair, preprocess, stratified_split,
synth_biased, dataset_hash, CONTINUOUS, CATEGORICAL
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
from loguru import logger
from sklearn.model_selection import train_test_split

from ._errors import DataError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSchema:
    """
    Column descriptors of a cohort

    Attributes
    ----------
    columns : tuple of (name, kind)
        Feature columns in matrix order, kind is 'continuous' or 'categorical'
    label_column : str
        Name of the binary outcome column
    sensitive_column : str
        Name of the binary sensitive attribute column
    sensitive_values : (str, str)
        The category strings coded as 0 and 1 (1 is the privileged group)
    filters : tuple of (name, minimum)
        Rows whose value in column name is below minimum are excluded
    """

    columns: Tuple[Tuple[str, str], ...]
    label_column: str
    sensitive_column: str
    sensitive_values: Tuple[str, str] = ("0", "1")
    filters: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "columns", tuple((str(n), str(k)) for n, k in self.columns)
        )
        object.__setattr__(
            self, "sensitive_values", tuple(self.sensitive_values)
        )
        object.__setattr__(
            self, "filters", tuple((str(n), float(v)) for n, v in self.filters)
        )

        names = self.feature_names
        if len(set(names)) != len(names):
            raise DataError("column names must be unique")
        if self.label_column == self.sensitive_column:
            raise DataError("label and sensitive column must be distinct")
        for dedicated in (self.label_column, self.sensitive_column):
            if dedicated in names:
                raise DataError(
                    f"'{dedicated}' is declared as a dedicated column and "
                    "must not also be a feature"
                )
        for name, kind in self.columns:
            if kind not in (CONTINUOUS, CATEGORICAL):
                raise DataError(f"unknown kind '{kind}' of column '{name}'")
        if len(self.sensitive_values) != 2 or (
            self.sensitive_values[0] == self.sensitive_values[1]
        ):
            raise DataError("sensitive_values needs two distinct strings")
        kinds = dict(self.columns)
        for name, _ in self.filters:
            if kinds.get(name) != CONTINUOUS:
                raise DataError(
                    f"filter on '{name}' needs a continuous feature column"
                )

    @property
    def feature_names(self):
        return [name for name, _ in self.columns]

    @property
    def n_features(self):
        return len(self.columns)

    def kind(self, name: str) -> str:
        return dict(self.columns)[name]

    def required_columns(self):
        """All column names a cohort file has to provide"""
        return self.feature_names + [self.label_column, self.sensitive_column]


@dataclass(frozen=True)
class LoadReport:
    """Row accounting of load_csv"""

    rows_read: int
    dropped_invalid: int = 0
    dropped_filtered: int = 0

    @property
    def dropped(self):
        return self.dropped_invalid + self.dropped_filtered


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Feature matrix, binary labels and binary sensitive attribute

    X holds floats once the dataset is preprocessed. A raw dataset with
    categorical columns keeps those cells as strings (object matrix).

    Attributes
    ----------
    X : ndarray (m, d)
    y : ndarray (m,) of 0/1
    a : ndarray (m,) of 0/1, 1 = privileged group
    schema : FeatureSchema
    encoders : dict
        categorical column -> {category: code}
    standardizers : dict
        continuous column -> (mean, population std)
    warnings : tuple of str
        data facts noticed while building the dataset
    load_report : LoadReport or None
    """

    X: np.ndarray
    y: np.ndarray
    a: np.ndarray
    schema: FeatureSchema
    encoders: Mapping[str, Mapping[str, int]] = field(default_factory=dict)
    standardizers: Mapping[str, Tuple[float, float]] = field(
        default_factory=dict
    )
    preprocessed: bool = False
    warnings: Tuple[str, ...] = ()
    load_report: Optional[LoadReport] = None

    def __post_init__(self):
        X = np.asarray(self.X)
        X = np.array(X, dtype=object if X.dtype == object else np.float64)
        if X.ndim != 2:
            raise DataError("X must be a matrix")
        y = np.asarray(self.y)
        a = np.asarray(self.a)
        m = X.shape[0]
        if y.shape != (m,) or a.shape != (m,):
            raise DataError(
                f"row counts differ: X {m}, y {y.shape}, a {a.shape}"
            )
        if X.shape[1] != self.schema.n_features:
            raise DataError(
                f"X has {X.shape[1]} columns, schema declares "
                f"{self.schema.n_features}"
            )
        if not (np.isin(y, (0, 1)).all() and np.isin(a, (0, 1)).all()):
            raise DataError("labels and sensitive values must be 0 or 1")
        y = y.astype(np.int64)
        a = a.astype(np.int64)
        for arr in (X, y, a):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def feature_names(self):
        return self.schema.feature_names

    def group_sizes(self):
        """Sizes (m0, m1) of the groups a = 0 and a = 1"""
        m1 = int(self.a.sum())
        return self.m - m1, m1

    def check_groups(self):
        """Raise DataError unless both sensitive groups are present"""
        m0, m1 = self.group_sizes()
        if m0 == 0 or m1 == 0:
            raise DataError(f"empty sensitive group (m0={m0}, m1={m1})")

    def take(self, index) -> "Dataset":
        """Rows [index] of the dataset, encoders and standardizers kept"""
        index = np.asarray(index)
        return replace(
            self,
            X=self.X[index],
            y=self.y[index],
            a=self.a[index],
            load_report=None,
        )


@dataclass(frozen=True, eq=False)
class SplitPair:
    """
    Disjoint train/test partition of one dataset

    Attributes
    ----------
    train, test : Dataset
    seed : int
    train_index, test_index : ndarray
        row numbers in the source dataset
    stratified_on : str
        'a,y' for the joint cells, 'a' after the fallback
    warnings : tuple of str
    """

    train: Dataset
    test: Dataset
    seed: int
    train_index: np.ndarray
    test_index: np.ndarray
    stratified_on: str = "a,y"
    warnings: Tuple[str, ...] = ()


def preprocess(d: Dataset, fitted: Optional[Dataset] = None) -> Dataset:
    """
    Encode categorical and standardize continuous columns

    Parameters
    ----------
    d : Dataset
        raw (or already preprocessed) dataset
    fitted : Dataset, optional
        dataset whose encoders and standardizers are applied instead of
        fitting new ones (the training partition when preprocessing test rows)

    Returns
    -------
    Dataset
        float matrix; categorical columns as first-appearance codes,
        continuous columns as (x - mean) / std
    """

    if d.preprocessed:
        return d
    if fitted is not None and not fitted.preprocessed:
        raise DataError("fitted dataset has not been preprocessed")

    encoders: Dict[str, Dict[str, int]] = {}
    standardizers: Dict[str, Tuple[float, float]] = {}
    warnings = list(d.warnings)
    X = np.zeros(d.X.shape, dtype=np.float64)

    for j, (name, kind) in enumerate(d.schema.columns):
        column = d.X[:, j]
        if kind == CATEGORICAL:
            if fitted is not None:
                mapping = dict(fitted.encoders[name])
            else:
                mapping = {}
            unseen = 0
            for value in column:
                key = str(value)
                if key not in mapping:
                    if fitted is not None:
                        unseen += 1
                    mapping[key] = len(mapping)
            if unseen:
                msg = f"column '{name}': {unseen} cells with unseen categories"
                logger.warning(msg)
                warnings.append(msg)
            X[:, j] = [mapping[str(value)] for value in column]
            encoders[name] = mapping
        else:
            values = column.astype(np.float64)
            if fitted is not None:
                mu, sigma = fitted.standardizers[name]
            else:
                mu = float(np.mean(values))
                sigma = float(np.std(values))
            if sigma == 0.0:
                if fitted is None:
                    msg = f"column '{name}' is constant, standardized to zeros"
                    logger.warning(msg)
                    warnings.append(msg)
                X[:, j] = 0.0
            else:
                X[:, j] = (values - mu) / sigma
            standardizers[name] = (mu, sigma)

    return replace(
        d,
        X=X,
        encoders=encoders,
        standardizers=standardizers,
        preprocessed=True,
        warnings=tuple(warnings),
    )


def _cells(d: Dataset, joint: bool):
    if joint:
        return d.a * 2 + d.y
    return d.a.copy()


def stratified_split(
    d: Dataset, test_fraction: float = 0.2, seed: int = 0
) -> SplitPair:
    """
    Stratified train/test split

    Stratifies on the joint (a, y) cell, falls back to the sensitive
    attribute alone when a cell has fewer than two rows.

    Parameters
    ----------
    d : Dataset
    test_fraction : float
        share of rows in the test partition, 0 < test_fraction < 1
    seed : int

    Returns
    -------
    SplitPair
    """

    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction {test_fraction} not in (0, 1)")
    d.check_groups()

    warnings = []
    stratified_on = "a,y"
    cells = _cells(d, joint=True)
    if np.bincount(cells, minlength=4).min() < 2:
        stratified_on = "a"
        cells = _cells(d, joint=False)
        msg = "an (a, y) cell has fewer than 2 rows, stratifying on a alone"
        logger.warning(msg)
        warnings.append(msg)
        if np.bincount(cells, minlength=2).min() < 2:
            raise DataError("a sensitive group has fewer than 2 rows")

    train_index, test_index = train_test_split(
        np.arange(d.m),
        test_size=test_fraction,
        random_state=seed,
        stratify=cells,
    )
    train_index = np.sort(train_index)
    test_index = np.sort(test_index)

    return SplitPair(
        train=d.take(train_index),
        test=d.take(test_index),
        seed=seed,
        train_index=train_index,
        test_index=test_index,
        stratified_on=stratified_on,
        warnings=tuple(warnings),
    )


def synth_biased(
    m: int, d: int, bias_strength: float, seed: int = 0
) -> Dataset:
    """
    Synthetic cohort with an injected group disparity

    Column 0 ('proxy') is the sensitive attribute plus Gaussian noise
    (correlation about 0.89). Columns 1..k carry the logistic ground truth
    and are independent of the group; the remaining columns are
    group-shifted Gaussians without label signal. The intercept of the
    ground truth is shifted by +bias_strength/2 for a = 1 and
    -bias_strength/2 for a = 0.

    Parameters
    ----------
    m : int
        number of rows, >= 100
    d : int
        number of features, >= 3
    bias_strength : float
        difference of the group intercepts in log-odds, >= 0
    seed : int

    Returns
    -------
    Dataset
        preprocessed-ready continuous features, standardization not applied
    """

    if m < 100 or d < 3:
        raise DataError(
            f"synth_biased needs m >= 100 and d >= 3 (m={m}, d={d})"
        )
    if not bias_strength >= 0.0:
        raise DataError(f"bias_strength must be >= 0, got {bias_strength}")

    rng = np.random.default_rng(seed)
    a = rng.binomial(1, 0.5, size=m)
    if a.min() == a.max():      # practically impossible for m >= 100
        a[0] = 1 - a[0]

    n_informative = max(2, (2 * (d - 1)) // 3)
    n_nuisance = d - 1 - n_informative

    proxy = (2.0 * a - 1.0) + rng.normal(0.0, 0.5, size=m)
    informative = rng.normal(0.0, 1.0, size=(m, n_informative))
    nuisance = rng.normal(0.0, 1.0, size=(m, n_nuisance)) + 0.5 * a[:, None]

    j = np.arange(1, n_informative + 1)
    coef = 1.5 * np.where(j % 2 == 1, 1.0, -1.0) / np.sqrt(j)
    logit = informative @ coef + bias_strength * (a - 0.5)
    y = rng.binomial(1, 1.0 / (1.0 + np.exp(-logit)))

    X = np.column_stack([proxy, informative, nuisance])
    names = (
        ["proxy"]
        + [f"x{i}" for i in range(1, n_informative + 1)]
        + [f"noise{i}" for i in range(1, n_nuisance + 1)]
    )
    schema = FeatureSchema(
        columns=tuple((name, CONTINUOUS) for name in names),
        label_column="outcome",
        sensitive_column="sex",
        sensitive_values=("F", "M"),
    )
    logger.debug(
        f"synth_biased: m={m}, d={d}, bias={bias_strength}, seed={seed}, "
        f"positive rate {y.mean():.3f}"
    )
    return Dataset(X=X, y=y, a=a, schema=schema)


def dataset_hash(d: Dataset) -> str:
    """SHA-256 hex digest over the matrix, labels and sensitive values"""
    h = hashlib.sha256()
    if d.X.dtype == object:
        h.update("\x1f".join(map(str, d.X.ravel())).encode("utf-8"))
    else:
        h.update(np.ascontiguousarray(d.X, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(d.y, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(d.a, dtype="<i8").tobytes())
    return h.hexdigest()
