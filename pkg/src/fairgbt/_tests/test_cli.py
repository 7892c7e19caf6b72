"""pytest program for the command line interface"""
import json
import sys

import pytest
from click.testing import CliRunner
from loguru import logger

from fairgbt._cli import cli

RUN = ["--rounds", "3", "--max-depth", "2", "--seed", "1"]


@pytest.fixture(autouse=True)
def restore_logger():
    yield
    logger.remove()
    logger.add(sys.stderr)


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    result = CliRunner().invoke(
        cli,
        ["synth", "--rows", "400", "--cols", "5", "--bias", "2.0",
         "--seed", "7", "--name", "cohort", "--out-dir", str(out)],
    )
    assert result.exit_code == 0, result.output
    return str(out / "cohort.csv"), str(out / "cohort.cfg")


def _data(cohort):
    return ["--data", cohort[0], "--schema", cohort[1]]


def test_synth_is_repeatable(tmp_path, cohort):
    runner = CliRunner()
    args = ["synth", "--rows", "400", "--cols", "5", "--bias", "2.0",
            "--seed", "7", "--name", "cohort", "--out-dir", str(tmp_path)]
    assert runner.invoke(cli, args).exit_code == 0
    for written, reference in zip(
        (tmp_path / "cohort.csv", tmp_path / "cohort.cfg"), cohort
    ):
        with open(reference, "rb") as f:
            assert written.read_bytes() == f.read()


def test_synth_precondition_exit_code(tmp_path):
    result = CliRunner().invoke(
        cli, ["synth", "--rows", "10", "--out-dir", str(tmp_path)]
    )
    assert result.exit_code == 3


def test_missing_schema_is_usage_error(cohort):
    result = CliRunner().invoke(cli, ["audit", "--data", cohort[0]])
    assert result.exit_code == 2


def test_missing_data_file(tmp_path, cohort):
    result = CliRunner().invoke(
        cli,
        ["audit", "--data", str(tmp_path / "absent.csv"), "--schema",
         cohort[1], "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 3


def test_out_dir_below_a_file(tmp_path):
    blocker = tmp_path / "taken"
    blocker.write_text("", encoding="utf-8")
    result = CliRunner().invoke(
        cli, ["synth", "--rows", "200", "--cols", "5", "--out-dir",
              str(blocker / "data")]
    )
    assert result.exit_code == 3


def test_bad_theta_is_usage_error(tmp_path, cohort):
    result = CliRunner().invoke(
        cli,
        ["mitigate", *_data(cohort), "--theta", "1,2",
         "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 2


def test_audit(tmp_path, cohort):
    result = CliRunner().invoke(
        cli, ["audit", *_data(cohort), *RUN, "--out-dir", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    document = json.loads((tmp_path / "audit.json").read_text())
    assert document["cohort"] == "cohort"
    assert set(document["fairness"]) >= {"spd", "theil", "wasserstein"}
    assert document["explanations"]["ranking"][0] in (
        document["explanations"]["disparity"]
    )
    assert document["provenance"]["config"]["train"]["rounds"] == 3
    for name in ("baseline.model", "shap_baseline.csv",
                 "disparity_baseline.csv"):
        assert (tmp_path / name).is_file()


def test_mitigate_with_zero_lambda_changes_nothing(tmp_path, cohort):
    result = CliRunner().invoke(
        cli,
        ["mitigate", *_data(cohort), *RUN, "--theta", "0,1,1,1",
         "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pre"] == report["post"]
    assert report["reductions"]["auc_drop"] == 0.0
    assert report["provenance"]["theta_source"] == "fixed"
    assert (tmp_path / "baseline.model").read_bytes() == (
        tmp_path / "mitigated.model"
    ).read_bytes()
    assert "spd reduction" in result.output


def test_config_theta_skips_the_search(tmp_path, cohort):
    config = tmp_path / "run.cfg"
    config.write_text("[fairness]\nlambda = 0\n", encoding="utf-8")
    result = CliRunner().invoke(
        cli,
        ["mitigate", *_data(cohort), *RUN, "--config", str(config),
         "--theta", "5,1,0,0.5", "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["provenance"]["theta_source"] == "fixed"
    config_echo = report["provenance"]["config"]
    assert config_echo["fixed_theta"] == [0.0, 1.0, 1.0, 1.0]
    assert report["pre"] == report["post"]
    assert not (tmp_path / "bo_history.csv").exists()


def test_mitigate_with_search(tmp_path, cohort):
    result = CliRunner().invoke(
        cli,
        ["mitigate", *_data(cohort), *RUN, "--budget", "3",
         "--init-points", "2", "--folds", "2", "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    history = (tmp_path / "bo_history.csv").read_text().splitlines()
    assert history[0].split(",")[:2] == ["k", "lambda"]
    assert len(history) == 4
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["provenance"]["config"]["search"]["budget"] == 3
    assert report["artifacts"]["bo_history"] == "bo_history.csv"
    assert len((tmp_path / "trace.csv").read_text().splitlines()) == 4
    assert (tmp_path / "report.txt").is_file()


def test_mitigate_is_deterministic(tmp_path, cohort):
    runner = CliRunner()
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        result = runner.invoke(
            cli,
            ["mitigate", *_data(cohort), *RUN, "--theta", "5,1,0,0.5",
             "--out-dir", str(out)],
        )
        assert result.exit_code == 0, result.output
        outputs.append(out)
    for name in ("report.json", "report.txt", "trace.csv",
                 "mitigated.model", "shap_mitigated.csv"):
        assert (outputs[0] / name).read_bytes() == (
            outputs[1] / name
        ).read_bytes()


def test_config_file_wins(tmp_path, cohort):
    config = tmp_path / "run.cfg"
    config.write_text("[train]\nrounds = 2\n", encoding="utf-8")
    result = CliRunner().invoke(
        cli,
        ["audit", *_data(cohort), *RUN, "--config", str(config),
         "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    document = json.loads((tmp_path / "audit.json").read_text())
    assert document["provenance"]["config"]["train"]["rounds"] == 2


def test_explain(tmp_path, cohort):
    runner = CliRunner()
    runner.invoke(cli, ["audit", *_data(cohort), *RUN,
                        "--out-dir", str(tmp_path)])
    out = tmp_path / "explain"
    result = runner.invoke(
        cli,
        ["explain", "--model", str(tmp_path / "baseline.model"),
         *_data(cohort), *RUN, "--partition", "all", "--out-dir", str(out)],
    )
    assert result.exit_code == 0, result.output
    rows = (out / "shap_baseline.csv").read_text().splitlines()
    assert rows[0].endswith(",base_value")
    assert len(rows) == 401
    assert (out / "disparity_baseline.csv").is_file()


def test_explain_corrupt_model(tmp_path, cohort):
    model = tmp_path / "broken.model"
    model.write_text("not a model\n", encoding="utf-8")
    result = CliRunner().invoke(
        cli,
        ["explain", "--model", str(model), *_data(cohort),
         "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 3


def test_report(tmp_path, cohort):
    runner = CliRunner()
    for name in ("icu", "ed"):
        runner.invoke(
            cli,
            ["mitigate", *_data(cohort), *RUN, "--theta", "1,1,0,0",
             "--out-dir", str(tmp_path / name)],
        )
    table = tmp_path / "table.txt"
    result = runner.invoke(
        cli,
        ["report", str(tmp_path / "icu" / "report.json"),
         str(tmp_path / "ed" / "report.json"), "--group", "MIMIC=cohort",
         "--out", str(table)],
    )
    assert result.exit_code == 0, result.output
    text = table.read_text()
    assert text.splitlines()[0].startswith("Cohort")
    assert "[MIMIC]" in text
    assert "[MIMIC]" in result.output


def test_report_bad_group(tmp_path):
    result = CliRunner().invoke(
        cli, ["report", str(tmp_path / "r.json"), "--group", "nogroup"]
    )
    assert result.exit_code == 2
