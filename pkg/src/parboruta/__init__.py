"""Boruta all-relevant feature selection on compiled CART forests.

Two importance backends are available: normalised impurity decrease read
off the tree structure (``"treeimp"``) and the divergence of the forest's
own predictions under a shared row permutation (``"permut"``).
"""

__version__ = "0.1.0"

from .boruta import (
    AggregateResult,
    BorutaConfig,
    SelectionReport,
    aggregate_runs,
    build_shadow,
    run_boruta,
    significance_test,
    update_hits,
)
from .data import (
    DataError,
    DataMatrix,
    SyntheticSpec,
    TaskKind,
    generate_synthetic,
    kfold_split,
    load_csv,
    select_columns,
    write_csv,
)
from .estimators import BorutaSelector, CARTForestClassifier, CARTForestRegressor
from .evaluation import (
    BenchmarkRecord,
    ClassificationMetrics,
    RegressionMetrics,
    benchmark,
    classification_metrics,
    cross_validate,
    regression_metrics,
)
from .forest import Forest, ForestParams, Tree, fit_forest, forest_stats, predict
from .importance import (
    ImportanceVector,
    impurity_importance,
    loss_kl,
    loss_mse,
    permutation_importance,
)

__all__ = [
    "AggregateResult", "BenchmarkRecord", "BorutaConfig", "BorutaSelector",
    "CARTForestClassifier", "CARTForestRegressor", "ClassificationMetrics", "DataError",
    "DataMatrix", "Forest", "ForestParams", "ImportanceVector", "RegressionMetrics",
    "SelectionReport", "SyntheticSpec", "TaskKind", "Tree", "aggregate_runs", "benchmark",
    "build_shadow", "classification_metrics", "cross_validate", "fit_forest", "forest_stats",
    "generate_synthetic", "impurity_importance", "kfold_split", "load_csv", "loss_kl",
    "loss_mse", "permutation_importance", "predict", "regression_metrics", "run_boruta",
    "select_columns", "significance_test", "update_hits", "write_csv",
]
