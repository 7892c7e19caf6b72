from __future__ import annotations

import configparser
import csv
import json
import os

import numpy as np
import pandas as pd
from loguru import logger

from ._dataset import CATEGORICAL, Dataset, FeatureSchema, LoadReport
from ._errors import DataError
from ._gbt import TreeEnsemble, TreeNode
from ._writer import MODEL_MAGIC, MODEL_VERSION

_MISSING = {"", "na", "nan", "null", "none"}


def _check_file(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"The file {path} does not exist")


def read_schema(path):
    """
    Reads a FeatureSchema from an INI file

    Sections: [schema] with label, sensitive and sensitive_values (two
    comma separated strings for codes 0 and 1), [columns] with
    name = continuous|categorical in column order, optional [filters] with
    name = minimum.

    Parameters
    ----------
    path : str
        Path of the schema file

    Returns
    -------
    FeatureSchema
    """
    _check_file(path)
    config = configparser.ConfigParser()
    config.optionxform = str
    try:
        config.read(path, encoding="utf-8")
        section = config["schema"]
        values = [v.strip() for v in section["sensitive_values"].split(",")]
        columns = tuple(
            (name, kind.strip()) for name, kind in config["columns"].items()
        )
        filters = ()
        if config.has_section("filters"):
            filters = tuple(
                (name, float(v)) for name, v in config["filters"].items()
            )
        return FeatureSchema(
            columns=columns,
            label_column=section["label"].strip(),
            sensitive_column=section["sensitive"].strip(),
            sensitive_values=tuple(values),
            filters=filters,
        )
    except (KeyError, ValueError, configparser.Error) as err:
        if isinstance(err, DataError):
            raise
        raise DataError(f"invalid schema file {path}: {err}") from err


def _to_float(text):
    # exact for repr-formatted floats, unlike pd.to_numeric
    try:
        return float(text)
    except ValueError:
        return np.nan


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """
    Reads a cohort csv file into a raw Dataset

    Rows with a missing or non-binary label, a sensitive value outside the
    two declared category strings, or an unparseable continuous cell are
    dropped and counted as invalid; rows failing a schema filter are
    dropped and counted as filtered.

    Parameters
    ----------
    path : str
        Path of a comma separated, UTF-8 file with a header row
    schema : FeatureSchema

    Returns
    -------
    Dataset
        unencoded and unstandardized; load_report holds the drop counts
    """
    _check_file(path)
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            quoting=csv.QUOTE_NONE,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as err:
        raise DataError(f"{path} has no header row") from err
    except pd.errors.ParserError as err:
        raise DataError(f"cannot parse {path}: {err}") from err

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in schema.required_columns() if c not in frame.columns]
    if missing:
        raise DataError(f"header of {path} lacks columns {missing}")
    for column in frame.columns:
        frame[column] = frame[column].str.strip()
    rows_read = len(frame)

    label = pd.to_numeric(frame[schema.label_column], errors="coerce")
    valid = label.isin([0, 1])
    sensitive = frame[schema.sensitive_column]
    valid &= sensitive.isin(schema.sensitive_values)

    features = {}
    for name, kind in schema.columns:
        if kind == CATEGORICAL:
            column = frame[name]
            valid &= ~column.str.lower().isin(_MISSING)
            features[name] = column
        else:
            column = frame[name].map(_to_float).astype(np.float64)
            valid &= column.notna() & np.isfinite(column)
            features[name] = column

    passes = pd.Series(True, index=frame.index)
    for name, minimum in schema.filters:
        passes &= features[name] >= minimum
    dropped_invalid = int((~valid).sum())
    dropped_filtered = int((valid & ~passes).sum())
    keep = (valid & passes).to_numpy()
    if dropped_invalid or dropped_filtered:
        logger.info(
            f"{path}: dropped {dropped_invalid} invalid and "
            f"{dropped_filtered} filtered of {rows_read} rows"
        )
    if not keep.any():
        raise DataError(f"{path} has no usable rows")

    if any(kind == CATEGORICAL for _, kind in schema.columns):
        X = np.empty((int(keep.sum()), schema.n_features), dtype=object)
        for j, (name, kind) in enumerate(schema.columns):
            values = features[name].to_numpy()[keep]
            if kind != CATEGORICAL:
                values = values.astype(np.float64)
            X[:, j] = list(values)
    else:
        X = np.column_stack(
            [features[name].to_numpy(dtype=np.float64)[keep]
             for name in schema.feature_names]
        )

    a = (sensitive[keep] == schema.sensitive_values[1]).to_numpy()
    return Dataset(
        X=X,
        y=label[keep].to_numpy().astype(np.int64),
        a=a.astype(np.int64),
        schema=schema,
        load_report=LoadReport(
            rows_read=rows_read,
            dropped_invalid=dropped_invalid,
            dropped_filtered=dropped_filtered,
        ),
    )


def _parse_tree(lines, pos):
    kind, *fields = lines[pos].split()
    if kind == "leaf":
        value, cover = map(float, fields)
        return TreeNode(cover=cover, value=value), pos + 1
    if kind != "split":
        raise DataError(f"unexpected model line '{lines[pos]}'")
    feature = int(fields[0])
    threshold, cover = float(fields[1]), float(fields[2])
    left, pos = _parse_tree(lines, pos + 1)
    right, pos = _parse_tree(lines, pos)
    node = TreeNode(
        cover=cover,
        feature_index=feature,
        threshold=threshold,
        left=left,
        right=right,
    )
    return node, pos


def read_model(path):
    """
    Reads a TreeEnsemble written by write_model

    Parameters
    ----------
    path : str

    Returns
    -------
    TreeEnsemble
    """
    _check_file(path)
    with open(path, encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    try:
        magic, version = lines[0].split()
        if magic != MODEL_MAGIC or int(version) != MODEL_VERSION:
            raise DataError(f"{path} is not a version {MODEL_VERSION} model")
        header = dict(line.split(maxsplit=1) for line in lines[1:5])
        n_trees = int(header["n_trees"])
        trees = []
        pos = 5
        for k in range(n_trees):
            if lines[pos] != f"tree {k}":
                raise DataError(f"expected 'tree {k}', got '{lines[pos]}'")
            tree, pos = _parse_tree(lines, pos + 1)
            trees.append(tree)
    except (IndexError, KeyError, ValueError) as err:
        if isinstance(err, DataError):
            raise
        raise DataError(f"corrupt model file {path}: {err}") from err
    return TreeEnsemble(
        trees=trees,
        learning_rate=float(header["learning_rate"]),
        base_margin=float(header["base_margin"]),
        n_features=int(header["n_features"]),
    )


def read_report(path):
    """
    Reads a ComparisonReport written by emit_report

    Parameters
    ----------
    path : str

    Returns
    -------
    ComparisonReport
    """
    from ._evaluate import ComparisonReport

    _check_file(path)
    with open(path, encoding="utf-8") as f:
        try:
            return ComparisonReport.from_dict(json.load(f))
        except (KeyError, TypeError, json.JSONDecodeError) as err:
            raise DataError(f"invalid report {path}: {err}") from err
