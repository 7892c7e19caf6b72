"""pytest program for the module _reader.py"""
import numpy as np
import pytest

from fairgbt import (
    DataError,
    TreeEnsemble,
    TreeNode,
    load_csv,
    read_model,
    read_schema,
    write_model,
    write_schema,
)
from fairgbt._dataset import CATEGORICAL, CONTINUOUS, FeatureSchema

SCHEMA = FeatureSchema(
    columns=(("age", CONTINUOUS), ("ward", CATEGORICAL)),
    label_column="outcome",
    sensitive_column="sex",
    sensitive_values=("F", "M"),
)

CSV = """age,ward,outcome,sex
30,icu,1,F
41, ed ,0,M
,icu,1,F
52,icu,2,M
17,ed,0,X
63,na,1,M
28,ed,0,M
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# tmp_path is a pytest fixture
def test_read_schema(tmp_path):
    path = str(tmp_path / "cohort.cfg")
    write_schema(SCHEMA, path)
    assert read_schema(path) == SCHEMA


def test_read_schema_with_filters(tmp_path):
    text = (
        "[schema]\nlabel = y\nsensitive = g\nsensitive_values = a, b\n"
        "[columns]\nAge = continuous\n[filters]\nAge = 18\n"
    )
    schema = read_schema(_write(tmp_path, "f.cfg", text))
    assert schema.feature_names == ["Age"]
    assert schema.sensitive_values == ("a", "b")
    assert schema.filters == (("Age", 18.0),)


def test_read_schema_missing_section(tmp_path):
    path = _write(tmp_path, "bad.cfg", "[columns]\nage = continuous\n")
    with pytest.raises(DataError):
        read_schema(path)


def test_read_schema_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_schema(str(tmp_path / "absent.cfg"))


def test_load_csv_drops_invalid_rows(tmp_path):
    d = load_csv(_write(tmp_path, "c.csv", CSV), SCHEMA)
    assert d.m == 3
    assert d.load_report.rows_read == 7
    assert d.load_report.dropped_invalid == 4
    assert d.y.tolist() == [1, 0, 0]
    assert d.a.tolist() == [0, 1, 1]
    assert d.X[:, 0].astype(float).tolist() == [30.0, 41.0, 28.0]
    assert d.X[1, 1] == "ed"


def test_load_csv_filters(tmp_path):
    schema = FeatureSchema(
        columns=SCHEMA.columns,
        label_column="outcome",
        sensitive_column="sex",
        sensitive_values=("F", "M"),
        filters=(("age", 29.0),),
    )
    d = load_csv(_write(tmp_path, "c.csv", CSV), schema)
    assert d.m == 2
    assert d.load_report.dropped_filtered == 1
    assert d.load_report.dropped == 5


def test_load_csv_continuous_only_is_float(tmp_path):
    schema = FeatureSchema(
        columns=(("age", CONTINUOUS),),
        label_column="outcome",
        sensitive_column="sex",
        sensitive_values=("F", "M"),
    )
    text = "age,outcome,sex\n1.5,1,F\n2.5,0,M\n"
    d = load_csv(_write(tmp_path, "c.csv", text), schema)
    assert d.X.dtype == np.float64
    assert d.X[:, 0].tolist() == [1.5, 2.5]


def test_load_csv_parses_repr_floats_exactly(tmp_path):
    schema = FeatureSchema(
        columns=(("age", CONTINUOUS),),
        label_column="outcome",
        sensitive_column="sex",
        sensitive_values=("F", "M"),
    )
    values = np.random.default_rng(0).normal(scale=3.0, size=600)
    lines = ["age,outcome,sex"]
    lines += [f"{v!r},{k % 2},{'FM'[k % 2]}" for k, v in enumerate(values)]
    path = _write(tmp_path, "c.csv", "\n".join(lines) + "\n")
    d = load_csv(path, schema)
    assert np.array_equal(d.X[:, 0], values)


def test_load_csv_header_mismatch(tmp_path):
    path = _write(tmp_path, "c.csv", "age,outcome\n1,1\n")
    with pytest.raises(DataError):
        load_csv(path, SCHEMA)


def test_load_csv_no_usable_rows(tmp_path):
    path = _write(tmp_path, "c.csv", "age,ward,outcome,sex\n1,icu,5,F\n")
    with pytest.raises(DataError):
        load_csv(path, SCHEMA)


def test_load_csv_empty_file(tmp_path):
    with pytest.raises(DataError):
        load_csv(_write(tmp_path, "c.csv", ""), SCHEMA)


def test_read_model(tmp_path):
    tree = TreeNode(
        cover=4.0,
        feature_index=1,
        threshold=0.1,
        left=TreeNode(cover=1.0, value=-0.3),
        right=TreeNode(cover=3.0, value=1.0 / 3.0),
    )
    model = TreeEnsemble(
        trees=[tree, TreeNode(cover=4.0, value=0.25)],
        learning_rate=0.1,
        base_margin=0.0,
        n_features=2,
    )
    path = str(tmp_path / "m.model")
    write_model(model, path)
    loaded = read_model(path)
    assert loaded == model
    assert loaded.trees[0].right.value == 1.0 / 3.0


def test_read_model_wrong_magic(tmp_path):
    path = _write(tmp_path, "m.model", "something-else 1\n")
    with pytest.raises(DataError):
        read_model(path)


def test_read_model_truncated(tmp_path):
    text = (
        "fairgbt-model 1\nlearning_rate 0.1\nbase_margin 0.0\n"
        "n_features 2\nn_trees 2\ntree 0\nleaf 0.5 3.0\n"
    )
    with pytest.raises(DataError):
        read_model(_write(tmp_path, "m.model", text))
