"""pytest program for the module _evaluate.py"""
import json

import numpy as np
import pytest

from fairgbt import (
    ComparisonReport,
    DataError,
    EvalResult,
    FairnessConfig,
    auc_roc,
    compare,
    emit_report,
    evaluate,
    render_table,
)
from fairgbt._evaluate import Stage, accuracy, reduction
from fairgbt._fairness_metrics import FairnessSnapshot
from fairgbt._reader import read_report


def stage(spd=0.37, theil=6444.92, wasserstein=0.2, auc=0.8, m=100):
    return Stage(
        fairness=FairnessSnapshot(
            spd=spd,
            theil=theil,
            theil_normalized=theil / m,
            wasserstein=wasserstein,
            rate_group0=0.3,
            rate_group1=0.3 + spd,
            m0=40,
            m1=60,
        ),
        performance=EvalResult(auc_roc=auc, accuracy=0.7, threshold=0.5,
                               m=m),
    )


META = {
    "cohort": "diagnosis",
    "theta_star": FairnessConfig(lam=2.5, w1=0.9, w2=0.1, w3=0.4),
    "explanations": {"ranking_pre": ("proxy", "x1")},
    "artifacts": {"trace": "trace.csv"},
    "provenance": {"seed": 7, "split": {"n_test": 100}},
}
REPORT = compare(stage(), stage(spd=0.24, theil=0.05, auc=0.79), META)


def brute_force_auc(p, y):
    pos = p[y == 1]
    neg = p[y == 0]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0
               for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


def test_auc_examples():
    y = np.array([0, 0, 1, 1])
    assert auc_roc(np.array([0.1, 0.4, 0.35, 0.8]), y) == 0.75
    assert auc_roc(np.array([0.1, 0.2, 0.7, 0.8]), y) == 1.0
    assert auc_roc(np.full(4, 0.3), y) == 0.5


def test_auc_matches_pair_counting():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 0, 1
        p = rng.integers(0, 20, size=n) / 20.0
        assert auc_roc(p, y) == brute_force_auc(p, y)


def test_auc_invariant_under_monotone_transform():
    rng = np.random.default_rng(1)
    p = rng.uniform(size=50)
    y = np.arange(50) % 2
    assert auc_roc(p, y) == auc_roc(np.exp(3 * p), y)


def test_auc_single_class():
    with pytest.raises(DataError):
        auc_roc(np.array([0.2, 0.4]), np.array([1, 1]))


def test_accuracy():
    assert accuracy(np.array([0.6, 0.4, 0.3]), np.array([1, 1, 0])) == (
        pytest.approx(2 / 3)
    )
    assert accuracy(np.array([0.9, 0.1]), np.array([1, 0])) == 1.0
    assert accuracy(np.array([0.9, 0.1]), np.array([0, 1])) == 0.0


def test_evaluate():
    result = evaluate(np.array([0.6, 0.4, 0.3, 0.8]), np.array([1, 1, 0, 0]))
    assert result.m == 4
    assert result.threshold == 0.5
    assert result.accuracy == 0.5


def test_reduction():
    assert reduction(0.37, 0.24) == pytest.approx(0.35135, abs=1e-5)
    assert reduction(0.2, 0.3) == pytest.approx(-0.5)
    assert reduction(0.0, 0.1) is None


def test_compare():
    assert REPORT.reductions["spd"] == pytest.approx(0.351, abs=5e-4)
    assert REPORT.theil_collapsed
    assert REPORT.theil_collapse_orders == pytest.approx(5.11, abs=0.01)
    assert REPORT.auc_drop == pytest.approx(0.01)
    assert REPORT.explanations["ranking_pre"] == ["proxy", "x1"]


def test_compare_identical_stages():
    same = compare(stage(), stage(), META)
    assert all(v == 0.0 for v in same.reductions.values())
    assert not same.theil_collapsed
    assert same.auc_drop == 0.0


def test_compare_zero_pre_metric():
    report = compare(stage(spd=0.0), stage(spd=0.1), META)
    assert report.reductions["spd"] is None


def test_compare_different_partitions():
    with pytest.raises(DataError):
        compare(stage(m=100), stage(m=90), META)


def test_emit_report(tmp_path):
    paths = emit_report(REPORT, tmp_path / "report.json")
    assert [p.name for p in paths] == ["report.json", "report.txt"]
    document = json.loads(paths[0].read_text(encoding="utf-8"))
    assert document["schema_version"] == 1
    assert list(document)[:5] == ["schema_version", "cohort", "pre", "post",
                                  "theta_star"]
    assert document["theta_star"]["lambda"] == 2.5
    assert document["provenance"]["seed"] == 7
    assert "diagnosis" in paths[1].read_text(encoding="utf-8")


def test_emit_report_parses_back(tmp_path):
    path = tmp_path / "report.json"
    emit_report(REPORT, path)
    assert read_report(str(path)) == REPORT


def test_emit_report_is_deterministic(tmp_path):
    first = emit_report(REPORT, tmp_path / "a" / "report.json")
    second = emit_report(REPORT, tmp_path / "b" / "report.json")
    for p, q in zip(first, second):
        assert p.read_bytes() == q.read_bytes()


def test_report_rejects_unknown_version():
    document = REPORT.to_dict()
    document["schema_version"] = 99
    with pytest.raises(DataError):
        ComparisonReport.from_dict(document)


def test_render_table():
    meta = dict(META, cohort="icu")
    other = compare(stage(), stage(spd=0.3, theil=6000.0), meta)
    table = render_table([REPORT, other])
    lines = table.splitlines()
    assert lines[0].startswith("Cohort")
    assert set(lines[1]) == {"-"}
    assert "35.1%" in lines[2]
    assert lines[2].startswith("diagnosis")
    assert lines[3].startswith("icu ")
    assert len(lines[2]) == len(lines[3])


def test_render_table_groups():
    other = compare(stage(), stage(), dict(META, cohort="ed"))
    table = render_table([REPORT, other], {"MIMIC": ["diagnosis"]})
    lines = table.splitlines()
    assert lines[2] == "[MIMIC]"
    assert "[other]" in lines
    assert lines[-1].startswith("ed ")
