"""
Long-running end-to-end checks on the synthetic acceptance cohort

Run with  pytest -m acceptance
"""
import numpy as np
import pytest

from fairgbt import SearchSpace, TrainConfig, optimize, treeshap_tree
from fairgbt._config import RunConfig, RunSettings
from fairgbt._pipeline import run_mitigate
from fairgbt._tests.test_bayes_opt import quadratic
from fairgbt._tests.test_explain import brute_force_shap, random_tree
from fairgbt._tests.test_pipeline import _cohort

pytestmark = pytest.mark.acceptance

SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture(scope="module")
def mitigations(tmp_path_factory):
    reports = []
    for seed in SEEDS:
        base = tmp_path_factory.mktemp(f"seed{seed}")
        data, schema = _cohort(base, 5000, 2.0, seed=seed)
        cfg = RunConfig(
            search=SearchSpace(budget=25, init_points=5, seed=seed),
            run=RunSettings(seed=seed, folds=5),
        )
        reports.append(run_mitigate(data, schema, cfg, base / "out"))
    return reports


def test_spd_reduced_without_auc_loss(mitigations):
    for report in mitigations:
        assert report.pre.fairness.spd >= 0.2
    passed = sum(
        report.reductions["spd"] >= 0.3 and report.auc_drop <= 0.02
        for report in mitigations
    )
    assert passed >= 4


def test_theil_drops_tenfold(mitigations):
    passed = sum(
        report.post.fairness.theil <= 0.1 * report.pre.fairness.theil
        for report in mitigations
    )
    assert passed >= 4


def test_proxy_attribution_flattens(mitigations):
    passed = 0
    for report in mitigations:
        pre = report.explanations["disparity_pre"]["proxy"]["delta_phi"]
        post = report.explanations["disparity_post"]["proxy"]["delta_phi"]
        passed += abs(post) < abs(pre)
    assert passed >= 4


def test_treeshap_matches_brute_force_on_deep_trees():
    rng = np.random.default_rng(1)
    for _ in range(100):
        d = int(rng.integers(1, 9))
        tree = random_tree(rng, d, int(rng.integers(1, 5)))
        for _ in range(10):
            x = rng.normal(size=d)
            phi, _ = treeshap_tree(tree, x)
            assert np.allclose(phi, brute_force_shap(tree, x), atol=1e-9,
                               rtol=0)


def test_bayesian_search_beats_random_search():
    wins = 0
    for seed in range(10):
        space = SearchSpace(budget=30, init_points=5, seed=seed)
        _, history = optimize(None, space, TrainConfig(), objective=quadratic)
        bo_best = max(t.j_value for t in history)
        samples = np.random.default_rng(seed).uniform(size=(30, 4))
        random_best = max(quadratic(u) for u in samples)
        wins += bo_best > random_best
    assert wins >= 7
