from __future__ import annotations

import configparser
import csv
import json
import math
import re
from pathlib import Path

import numpy as np

MODEL_MAGIC = "fairgbt-model"
MODEL_VERSION = 1
_FLOAT_TAG = "\x00f17:"


def write_table(path, header, rows):
    """
    Writes rows to a csv file

    Parameters
    ----------
    path : str or Path
        Path to save the table to
    header : list of str
        Column names, written as the first line
    rows : iterable of lists
        Table rows
    """
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for line in rows:
            writer.writerow(line)


def write_file(path, data, append=False, newline=True):
    if append:
        mode = "a"
    else:
        mode = "w"
    with open(path, mode, encoding="utf-8", newline="") as f:
        f.write(f"{data}")
        if newline:
            f.write("\n")


def _tag_floats(obj):
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return None
        return _FLOAT_TAG + format(float(obj), ".17g")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tag_floats(v) for v in obj]
    return obj


def json_text(obj):
    """
    JSON document with every float written with 17 significant digits

    Non-finite floats become null. Key order is kept as given.
    """
    text = json.dumps(_tag_floats(obj), indent=2, ensure_ascii=False)
    tag = re.escape(json.dumps(_FLOAT_TAG)[1:-1])
    return re.sub('"' + tag + '([^"]*)"', r"\1", text) + "\n"


def write_schema(schema, path):
    """
    Writes a FeatureSchema as an INI file readable by read_schema

    Parameters
    ----------
    schema : FeatureSchema
    path : str or Path
    """
    config = configparser.ConfigParser()
    config.optionxform = str
    config["schema"] = {
        "label": schema.label_column,
        "sensitive": schema.sensitive_column,
        "sensitive_values": ", ".join(schema.sensitive_values),
    }
    config["columns"] = dict(schema.columns)
    if schema.filters:
        config["filters"] = {name: repr(v) for name, v in schema.filters}
    with open(path, "w", encoding="utf-8", newline="") as f:
        config.write(f)


def write_dataset_csv(d, path):
    """
    Writes a dataset in the cohort csv layout: features, label, sensitive
    attribute (as its category string)

    Parameters
    ----------
    d : Dataset
    path : str or Path
    """
    schema = d.schema
    header = schema.required_columns()
    rows = (
        [*(x.item() if hasattr(x, "item") else x for x in d.X[i]),
         int(d.y[i]),
         schema.sensitive_values[int(d.a[i])]]
        for i in range(d.m)
    )
    write_table(path, header, rows)


def _node_lines(node, out):
    if node.is_leaf:
        out.append(f"leaf {node.value!r} {node.cover!r}")
        return
    out.append(
        f"split {node.feature_index} {node.threshold!r} {node.cover!r}"
    )
    _node_lines(node.left, out)
    _node_lines(node.right, out)


def model_text(model):
    """Versioned text form of a TreeEnsemble, one block per tree"""
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        f"learning_rate {float(model.learning_rate)!r}",
        f"base_margin {float(model.base_margin)!r}",
        f"n_features {model.n_features}",
        f"n_trees {len(model.trees)}",
    ]
    for k, tree in enumerate(model.trees):
        lines.append(f"tree {k}")
        _node_lines(tree, lines)
    return "\n".join(lines) + "\n"


def write_model(model, path):
    """
    Writes a TreeEnsemble to disk

    Parameters
    ----------
    model : TreeEnsemble
    path : str or Path
    """
    write_file(Path(path), model_text(model), newline=False)
