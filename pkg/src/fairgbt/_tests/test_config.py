"""pytest program for the module _config.py"""
import pytest

from fairgbt import DataError, RunConfig, build_run_config
from fairgbt._config import read_run_config


def _write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_defaults():
    cfg = build_run_config()
    assert cfg == RunConfig()
    assert cfg.train.rounds == 100
    assert cfg.search.alpha == 0.5
    assert cfg.search.lambda_bounds == (1e-3, 1e2)
    assert cfg.run.folds == 5


def test_flags_override_defaults():
    cfg = build_run_config(
        {"train": {"rounds": 7, "max_depth": None}, "run": {"seed": 3}}
    )
    assert cfg.train.rounds == 7
    assert cfg.train.max_depth == 3
    assert cfg.run.seed == 3


def test_config_file_overrides_flags(tmp_path):
    path = _write(
        tmp_path,
        "[train]\nrounds = 12\nlearning_rate = 0.05\n"
        "[fairness]\nlambda = 2.0\ntheil_normalized = false\n"
        "[search]\nlambda_bounds = 0.01, 10\nbudget = 9\n",
    )
    cfg = build_run_config({"train": {"rounds": 7, "max_depth": 4}}, path)
    assert cfg.train.rounds == 12
    assert cfg.train.max_depth == 4
    assert cfg.train.learning_rate == 0.05
    assert cfg.fairness.lam == 2.0
    assert cfg.fairness.theil_normalized is False
    assert cfg.search.lambda_bounds == (0.01, 10.0)
    assert cfg.search.budget == 9
    assert cfg.fixed_theta == (2.0, 1.0, 1.0, 1.0)


def test_layers_validate_merged_values(tmp_path):
    # budget 3 alone is below the default init_points
    path = _write(tmp_path, "[search]\nbudget = 3\n")
    cfg = build_run_config({"search": {"init_points": 2}}, path)
    assert (cfg.search.budget, cfg.search.init_points) == (3, 2)


def test_unknown_option(tmp_path):
    with pytest.raises(DataError):
        build_run_config(config_path=_write(tmp_path, "[train]\ntrees = 3\n"))


def test_unknown_section(tmp_path):
    with pytest.raises(DataError):
        read_run_config(_write(tmp_path, "[model]\nrounds = 3\n"))


def test_bad_value(tmp_path):
    with pytest.raises(DataError):
        build_run_config(config_path=_write(tmp_path, "[run]\nseed = x\n"))
    with pytest.raises(DataError):
        build_run_config(
            config_path=_write(tmp_path, "[run]\ntest_fraction = 1.5\n")
        )


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        build_run_config(config_path=str(tmp_path / "absent.cfg"))


def test_to_dict_echoes_every_section():
    document = build_run_config().to_dict()
    assert set(document) == {
        "train", "fairness", "search", "run", "fixed_theta"
    }
    assert document["fixed_theta"] is None
    assert document["fairness"]["lambda"] == 0.0
    assert document["search"]["lambda_bounds"] == [1e-3, 1e2]


def test_fairness_section_without_theta_keeps_the_search(tmp_path):
    path = _write(tmp_path, "[fairness]\ntheil_normalized = false\n")
    cfg = build_run_config(config_path=path)
    assert cfg.fixed_theta is None
    assert cfg.fairness.theil_normalized is False


def test_partial_theta_keeps_default_weights(tmp_path):
    path = _write(tmp_path, "[fairness]\nw2 = 0\nlambda = 4\n")
    assert build_run_config(config_path=path).fixed_theta == (
        4.0, 1.0, 0.0, 1.0
    )


def test_search_score_weights(tmp_path):
    path = _write(tmp_path, "[search]\nscore_weights = 1, 0, 0.5\n")
    cfg = build_run_config(config_path=path)
    assert cfg.search.score_weights == (1.0, 0.0, 0.5)
    path = _write(tmp_path, "[search]\nscore_weights = 0, 0, 0\n")
    with pytest.raises(DataError):
        build_run_config(config_path=path)
