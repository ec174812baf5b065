from .cv import (
    CvReport,
    FoldResult,
    Grids,
    MethodReport,
    SweepRow,
    TrainSettings,
    forecast_cv,
    hide_fraction,
    loo_cv,
    masking_experiment,
    run_fold,
)
from .metrics import ConfusionCounts, RocCurve, accuracy, roc_auc
from .synthetic import SyntheticSpec, generate_synthetic

__all__ = [
    "ConfusionCounts", "CvReport", "FoldResult", "Grids", "MethodReport", "RocCurve",
    "SweepRow", "SyntheticSpec", "TrainSettings", "accuracy", "forecast_cv",
    "generate_synthetic", "hide_fraction", "loo_cv", "masking_experiment", "roc_auc",
    "run_fold",
]
