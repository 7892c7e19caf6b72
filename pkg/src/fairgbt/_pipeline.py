"""
End-to-end stages behind the command line: audit, mitigate, explain and
the multi-cohort summary

Imports
-------
dataclasses, pathlib, time, numpy, loguru

Exports
-------
Prepared, AuditResult, prepare, audit, run_audit, run_mitigate, run_explain,
run_report
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Mapping, Optional, Sequence

from loguru import logger

from ._bayes_opt import history_rows, optimize
from ._config import RunConfig
from ._dataset import (
    Dataset,
    FeatureSchema,
    SplitPair,
    dataset_hash,
    preprocess,
    stratified_split,
)
from ._errors import DataError
from ._evaluate import (
    REPORT_SCHEMA_VERSION,
    ComparisonReport,
    Stage,
    compare,
    emit_report,
    evaluate,
    render_table,
)
from ._explain import (
    GroupDisparity,
    ShapAttribution,
    group_disparity,
    mean_abs_ranking,
    ranking_shift,
    treeshap_ensemble,
    write_attributions,
    write_disparity,
)
from ._fair_training import FairnessConfig, train_fair_traced
from ._fairness_metrics import GroupView, snapshot
from ._gbt import TrainConfig, TreeEnsemble, predict_proba, train_baseline
from ._reader import load_csv, read_model, read_report, read_schema
from ._writer import json_text, write_file, write_model, write_table


@dataclass(frozen=True, eq=False)
class Prepared:
    """Loaded cohort, its seeded split and the preprocessed partitions"""

    cohort: str
    schema: FeatureSchema
    raw: Dataset
    split: SplitPair
    train: Dataset
    test: Dataset

    @property
    def warnings(self):
        return list(self.split.warnings) + list(self.test.warnings)


@dataclass(frozen=True, eq=False)
class AuditResult:
    """Baseline model with its test-partition metrics and attributions"""

    model: TreeEnsemble
    stage: Stage
    attribution: ShapAttribution
    disparity: GroupDisparity


def prepare(data_path, schema_path, seed=0, test_fraction=0.2) -> Prepared:
    """
    Load a cohort, split it and preprocess both partitions with the
    encoders and standardizers of the training partition
    """

    schema = read_schema(str(schema_path))
    raw = load_csv(str(data_path), schema)
    split = stratified_split(raw, test_fraction=test_fraction, seed=seed)
    train = preprocess(split.train)
    test = preprocess(split.test, fitted=train)
    logger.info(
        f"{Path(data_path).name}: {raw.m} rows "
        f"(train {train.m}, test {test.m}, groups {raw.group_sizes()})"
    )
    return Prepared(
        cohort=Path(data_path).stem,
        schema=schema,
        raw=raw,
        split=split,
        train=train,
        test=test,
    )


def stage_of(model: TreeEnsemble, test: Dataset) -> Stage:
    """Hard fairness metrics and performance of a model on test rows"""
    p = predict_proba(model, test.X)
    return Stage(
        fairness=snapshot(GroupView(p, test.a)),
        performance=evaluate(p, test.y),
    )


def explain_model(model: TreeEnsemble, data: Dataset):
    """TreeSHAP attributions and their group disparity on data"""
    attribution = treeshap_ensemble(model, data.X, data.feature_names)
    return attribution, group_disparity(attribution, data.a)


def audit(prepared: Prepared, tcfg: TrainConfig) -> AuditResult:
    """Train the baseline and measure it on the test partition"""
    model = train_baseline(prepared.train, tcfg)
    attribution, disparity = explain_model(model, prepared.test)
    return AuditResult(
        model=model,
        stage=stage_of(model, prepared.test),
        attribution=attribution,
        disparity=disparity,
    )


def _provenance(prepared: Prepared, cfg: RunConfig, data_path, schema_path):
    from . import __version__

    load = prepared.raw.load_report
    return {
        "version": __version__,
        "data": Path(data_path).name,
        "schema": Path(schema_path).name,
        "dataset_hash": dataset_hash(prepared.raw),
        "load_report": None if load is None else asdict(load),
        "split": {
            "seed": prepared.split.seed,
            "stratified_on": prepared.split.stratified_on,
            "n_train": prepared.train.m,
            "n_test": prepared.test.m,
        },
        "config": cfg.to_dict(),
        "warnings": prepared.warnings,
    }


def _write_explanations(out_dir: Path, suffix, attribution, disparity):
    shap_path = out_dir / f"shap_{suffix}.csv"
    disparity_path = out_dir / f"disparity_{suffix}.csv"
    write_attributions(attribution, shap_path)
    write_disparity(attribution, disparity, disparity_path)
    return shap_path.name, disparity_path.name


def run_audit(data_path, schema_path, cfg: RunConfig, out_dir) -> Path:
    """
    Pre-mitigation audit of one cohort

    Writes baseline.model, shap_baseline.csv, disparity_baseline.csv and
    audit.json (fairness snapshot, performance, SHAP ranking and
    disparities, provenance) to out_dir.

    Returns
    -------
    Path
        the audit json file
    """

    start_time = time.time()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prepared = prepare(data_path, schema_path, cfg.run.seed,
                       cfg.run.test_fraction)
    result = audit(prepared, cfg.train)

    write_model(result.model, out_dir / "baseline.model")
    shap_name, disparity_name = _write_explanations(
        out_dir, "baseline", result.attribution, result.disparity
    )
    document = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "cohort": prepared.cohort,
        "fairness": result.stage.fairness.to_dict(),
        "performance": result.stage.performance.to_dict(),
        "explanations": {
            "ranking": mean_abs_ranking(result.attribution),
            "disparity": result.disparity.as_dict(),
            "base_value": result.attribution.base_value,
        },
        "artifacts": {
            "model": "baseline.model",
            "shap": shap_name,
            "disparity": disparity_name,
        },
        "provenance": _provenance(prepared, cfg, data_path, schema_path),
    }
    path = out_dir / "audit.json"
    write_file(path, json_text(document), newline=False)
    fairness = result.stage.fairness
    logger.info(
        f"audit {prepared.cohort}: SPD {fairness.spd:.4f}, "
        f"Theil {fairness.theil:.4g}, W {fairness.wasserstein:.4f}, "
        f"AUC {result.stage.performance.auc_roc:.4f}, "
        f"run time: {round(time.time() - start_time, 2)} seconds"
    )
    return path


def run_mitigate(
    data_path,
    schema_path,
    cfg: RunConfig,
    out_dir,
    theta: Optional[Sequence[float]] = None,
) -> ComparisonReport:
    """
    Audit, search theta (unless given), retrain with theta* and compare

    Parameters
    ----------
    data_path, schema_path : str or Path
    cfg : RunConfig
    out_dir : str or Path
    theta : 4 floats, optional
        fixed (lambda, w1, w2, w3); skips the Bayesian optimization.
        Defaults to cfg.fixed_theta when the config file pinned theta

    Returns
    -------
    ComparisonReport
        also written to out_dir/report.json and report.txt next to
        bo_history.csv, trace.csv, both models and the SHAP exports
    """

    start_time = time.time()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prepared = prepare(data_path, schema_path, cfg.run.seed,
                       cfg.run.test_fraction)
    pre = audit(prepared, cfg.train)

    artifacts = {"baseline_model": "baseline.model"}
    if theta is None:
        theta = cfg.fixed_theta
    if theta is None:
        theta_star, history = optimize(
            prepared.train,
            cfg.search,
            cfg.train,
            folds=cfg.run.folds,
            threads=cfg.run.threads,
            theil_normalized=cfg.fairness.theil_normalized,
        )
        write_table(out_dir / "bo_history.csv", *history_rows(history))
        artifacts["bo_history"] = "bo_history.csv"
    else:
        if len(theta) != 4:
            raise DataError(f"theta needs 4 values, got {len(theta)}")
        theta_star = tuple(float(v) for v in theta)
    lam, w1, w2, w3 = theta_star
    fcfg = FairnessConfig(lam=lam, w1=w1, w2=w2, w3=w3,
                          theil_normalized=cfg.fairness.theil_normalized)

    model, trace = train_fair_traced(prepared.train, cfg.train, fcfg)
    attribution, disparity = explain_model(model, prepared.test)
    post = stage_of(model, prepared.test)

    write_model(pre.model, out_dir / "baseline.model")
    write_model(model, out_dir / "mitigated.model")
    artifacts["mitigated_model"] = "mitigated.model"
    write_table(out_dir / "trace.csv", trace.header(), trace.as_rows())
    artifacts["trace"] = "trace.csv"
    names = _write_explanations(out_dir, "baseline", pre.attribution,
                                pre.disparity)
    artifacts["shap_baseline"], artifacts["disparity_baseline"] = names
    names = _write_explanations(out_dir, "mitigated", attribution, disparity)
    artifacts["shap_mitigated"], artifacts["disparity_mitigated"] = names

    shift = ranking_shift(pre.attribution, attribution)
    explanations = {
        "ranking_pre": mean_abs_ranking(pre.attribution),
        "ranking_post": mean_abs_ranking(attribution),
        "ranking_shift": {f: list(r) for f, r in shift.items()},
        "disparity_pre": pre.disparity.as_dict(),
        "disparity_post": disparity.as_dict(),
    }
    provenance = _provenance(prepared, cfg, data_path, schema_path)
    provenance["theta_source"] = "fixed" if theta is not None else "search"
    provenance["trace_monotonicity_violations"] = (
        trace.monotonicity_violations()
    )

    report = compare(
        pre.stage,
        post,
        {
            "cohort": prepared.cohort,
            "theta_star": fcfg,
            "explanations": explanations,
            "artifacts": artifacts,
            "provenance": provenance,
        },
    )
    emit_report(report, out_dir / "report.json")
    spd_reduction = report.reductions.get("spd")
    logger.info(
        f"mitigate {prepared.cohort}: theta*={fcfg.theta}, SPD "
        f"{pre.stage.fairness.spd:.4f} -> {post.fairness.spd:.4f} "
        f"({'n/a' if spd_reduction is None else f'{spd_reduction:.1%}'}), "
        f"AUC drop {report.auc_drop:.4f}, "
        f"run time: {round(time.time() - start_time, 2)} seconds"
    )
    return report


def run_explain(
    model_path,
    data_path,
    schema_path,
    cfg: RunConfig,
    out_dir,
    partition: str = "test",
    suffix: Optional[str] = None,
) -> List[Path]:
    """
    SHAP attribution and disparity exports of a saved model

    The cohort is split and preprocessed as in audit/mitigate (same seed
    and test fraction) so the model sees the features it was trained on.

    Parameters
    ----------
    partition : str
        'test' for the test partition, 'all' for every loaded row
    suffix : str, optional
        file name suffix, the model file stem by default

    Returns
    -------
    list of Path
    """

    if partition not in ("test", "all"):
        raise DataError(f"partition must be 'test' or 'all', got {partition}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = read_model(str(model_path))
    prepared = prepare(data_path, schema_path, cfg.run.seed,
                       cfg.run.test_fraction)
    if partition == "test":
        data = prepared.test
    else:
        data = preprocess(prepared.raw, fitted=prepared.train)
    attribution, disparity = explain_model(model, data)
    suffix = suffix or Path(model_path).stem
    names = _write_explanations(out_dir, suffix, attribution, disparity)
    logger.info(
        f"explain {Path(model_path).name} on {partition} ({data.m} rows): "
        f"top features {mean_abs_ranking(attribution)[:3]}"
    )
    return [out_dir / name for name in names]


def run_report(
    report_paths: Sequence,
    groups: Optional[Mapping[str, Sequence[str]]] = None,
    out_path=None,
) -> str:
    """
    Summary table over several cohort reports

    Returns
    -------
    str
        the table, also written to out_path when given
    """

    reports = [read_report(str(p)) for p in report_paths]
    table = render_table(reports, groups)
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        write_file(out_path, table, newline=False)
    return table
