__version__ = "0.1.0"

from ._bayes_opt import (
    GPSurrogate,
    SearchSpace,
    Trial,
    expected_improvement,
    gp_fit,
    objective_J,
    optimize,
    propose_next,
)
from ._config import RunConfig, build_run_config
from ._dataset import (
    Dataset,
    FeatureSchema,
    LoadReport,
    SplitPair,
    dataset_hash,
    preprocess,
    stratified_split,
    synth_biased,
)
from ._errors import DataError, FairGBTError, NumericalError
from ._evaluate import (
    ComparisonReport,
    EvalResult,
    auc_roc,
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
    treeshap_tree,
)
from ._fair_training import (
    FairnessConfig,
    TrainingTrace,
    fairness_gradient,
    train_fair,
    train_fair_traced,
)
from ._fairness_metrics import (
    FairnessSnapshot,
    GroupView,
    fairness_loss,
    snapshot,
    spd,
    theil,
    wasserstein1d,
)
from ._gbt import (
    TrainConfig,
    TreeEnsemble,
    TreeNode,
    fit_tree,
    predict_margin,
    predict_proba,
    train_baseline,
)
from ._reader import load_csv, read_model, read_schema
from ._writer import write_dataset_csv, write_model, write_schema

__all__ = (
    "FeatureSchema",
    "LoadReport",
    "Dataset",
    "SplitPair",
    "load_csv",
    "preprocess",
    "stratified_split",
    "synth_biased",
    "dataset_hash",
    "read_schema",
    "write_schema",
    "write_dataset_csv",
    "TreeNode",
    "TreeEnsemble",
    "TrainConfig",
    "fit_tree",
    "train_baseline",
    "predict_margin",
    "predict_proba",
    "write_model",
    "read_model",
    "GroupView",
    "FairnessSnapshot",
    "spd",
    "theil",
    "wasserstein1d",
    "fairness_loss",
    "snapshot",
    "FairnessConfig",
    "TrainingTrace",
    "fairness_gradient",
    "train_fair",
    "train_fair_traced",
    "SearchSpace",
    "Trial",
    "GPSurrogate",
    "objective_J",
    "gp_fit",
    "expected_improvement",
    "propose_next",
    "optimize",
    "ShapAttribution",
    "GroupDisparity",
    "treeshap_tree",
    "treeshap_ensemble",
    "mean_abs_ranking",
    "group_disparity",
    "ranking_shift",
    "EvalResult",
    "ComparisonReport",
    "auc_roc",
    "evaluate",
    "compare",
    "emit_report",
    "render_table",
    "RunConfig",
    "build_run_config",
    "FairGBTError",
    "DataError",
    "NumericalError",
)
