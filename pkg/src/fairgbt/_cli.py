"""
Command line interface

    fairgbt synth    --rows 5000 --cols 10 --bias 2.0 --seed 7 --out-dir data
    fairgbt audit    --data data/synth.csv --schema data/synth.cfg
    fairgbt mitigate --data data/synth.csv --schema data/synth.cfg \\
                     --budget 25 --folds 5
    fairgbt explain  --model out/mitigated.model --data ... --schema ...
    fairgbt report   out/*/report.json --group MIMIC=icu,ed

Exit codes: 0 success, 2 usage error, 3 data error or file system error,
4 numerical failure.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
from loguru import logger

from ._config import build_run_config
from ._dataset import synth_biased
from ._errors import DataError, NumericalError
from ._pipeline import run_audit, run_explain, run_mitigate, run_report
from ._writer import write_dataset_csv, write_schema

EXIT_DATA = 3
EXIT_NUMERICAL = 4


class _FairGBTGroup(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (DataError, FileNotFoundError) as err:
            logger.error(f"{type(err).__name__}: {err}")
            ctx.exit(EXIT_DATA)
        except NumericalError as err:
            logger.error(f"NumericalError: {err}")
            ctx.exit(EXIT_NUMERICAL)
        except OSError as err:
            logger.error(f"{type(err).__name__}: {err}")
            ctx.exit(EXIT_DATA)


def _theta(ctx, param, value):
    if value is None:
        return None
    try:
        theta = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected 4 comma separated numbers")
    if len(theta) != 4:
        raise click.BadParameter("expected lambda,w1,w2,w3")
    return theta


def _groups(ctx, param, value):
    groups = {}
    for item in value:
        name, sep, cohorts = item.partition("=")
        if not sep or not name:
            raise click.BadParameter(f"expected NAME=c1,c2, got '{item}'")
        groups[name] = [c.strip() for c in cohorts.split(",") if c.strip()]
    return groups


def _data_options(f):
    f = click.option("--schema", "schema_path", required=True,
                     type=click.Path(dir_okay=False),
                     help="Schema INI file of the cohort")(f)
    f = click.option("--data", "data_path", required=True,
                     type=click.Path(dir_okay=False),
                     help="Cohort csv file")(f)
    return f


def _run_options(f):
    options = [
        click.option("--config", "config_path", default=None,
                     type=click.Path(dir_okay=False),
                     help="Run config INI; its values win over flags"),
        click.option("--seed", type=int, default=None,
                     help="Seed of split, folds, search and subsampling"),
        click.option("--test-fraction", type=float, default=None),
        click.option("--rounds", type=int, default=None),
        click.option("--learning-rate", type=float, default=None),
        click.option("--max-depth", type=int, default=None),
        click.option("--threads", type=int, default=None,
                     help="Folds trained in parallel"),
        click.option("--out-dir", type=click.Path(file_okay=False),
                     default="out", show_default=True),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _flags(kwargs, search=None):
    seed = kwargs.get("seed")
    return {
        "train": {
            "rounds": kwargs.get("rounds"),
            "learning_rate": kwargs.get("learning_rate"),
            "max_depth": kwargs.get("max_depth"),
            "seed": seed,
        },
        "run": {
            "seed": seed,
            "test_fraction": kwargs.get("test_fraction"),
            "folds": kwargs.get("folds"),
            "threads": kwargs.get("threads"),
        },
        "search": dict(search or {}, seed=seed),
    }


@click.group(cls=_FairGBTGroup)
@click.version_option(package_name="FairGBT")
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"],
                                case_sensitive=False))
def cli(log_level):
    """Fairness-aware gradient boosting: audit, mitigate, explain."""
    logger.remove()
    logger.add(sys.stderr, level=log_level.upper())


@cli.command(help="Write a synthetic biased cohort and its schema")
@click.option("--rows", type=int, default=5000, show_default=True)
@click.option("--cols", type=int, default=10, show_default=True)
@click.option("--bias", type=float, default=2.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--name", default="synth", show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False),
              default="data", show_default=True)
def synth(rows, cols, bias, seed, name, out_dir):
    d = synth_biased(rows, cols, bias, seed=seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(d, out_dir / f"{name}.csv")
    write_schema(d.schema, out_dir / f"{name}.cfg")
    logger.info(f"wrote {out_dir / name}.csv and {out_dir / name}.cfg")


@cli.command(help="Train the baseline and audit its fairness")
@_data_options
@_run_options
def audit(data_path, schema_path, config_path, out_dir, **kwargs):
    cfg = build_run_config(_flags(kwargs), config_path)
    path = run_audit(data_path, schema_path, cfg, out_dir)
    click.echo(str(path))


@cli.command(help="Search theta, retrain fairness-aware and compare")
@_data_options
@_run_options
@click.option("--budget", type=int, default=None,
              help="Number of Bayesian optimization trials")
@click.option("--init-points", type=int, default=None)
@click.option("--alpha", type=float, default=None,
              help="Weight of AUC against L_fair in J")
@click.option("--folds", type=int, default=None)
@click.option("--theta", callback=_theta, default=None,
              help="Fixed lambda,w1,w2,w3; skips the search")
def mitigate(data_path, schema_path, config_path, out_dir, budget,
             init_points, alpha, theta, **kwargs):
    search = {"budget": budget, "init_points": init_points, "alpha": alpha}
    cfg = build_run_config(_flags(kwargs, search=search), config_path)
    if cfg.fixed_theta is not None:
        # config file wins over --theta
        theta = cfg.fixed_theta
    report = run_mitigate(data_path, schema_path, cfg, out_dir, theta=theta)
    click.echo(str(Path(out_dir) / "report.json"))
    for name in ("spd", "theil", "wasserstein"):
        value = report.reductions.get(name)
        shown = "n/a" if value is None else f"{100 * value:.1f}%"
        click.echo(f"{name} reduction: {shown}")
    click.echo(f"auc drop: {report.auc_drop:.4f}")


@cli.command(help="SHAP attribution and disparity exports of a saved model")
@click.option("--model", "model_path", required=True,
              type=click.Path(dir_okay=False))
@_data_options
@_run_options
@click.option("--partition", type=click.Choice(["test", "all"]),
              default="test", show_default=True)
def explain(model_path, data_path, schema_path, config_path, out_dir,
            partition, **kwargs):
    cfg = build_run_config(_flags(kwargs), config_path)
    for path in run_explain(model_path, data_path, schema_path, cfg,
                            out_dir, partition=partition):
        click.echo(str(path))


@cli.command(help="Summary table of several cohort reports")
@click.argument("reports", nargs=-1, required=True,
                type=click.Path(dir_okay=False))
@click.option("--group", "groups", multiple=True, callback=_groups,
              help="Section NAME=cohort1,cohort2; repeatable")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="Also write the table to this file")
def report(reports, groups, out_path):
    click.echo(run_report(reports, groups or None, out_path), nl=False)
