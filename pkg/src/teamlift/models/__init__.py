"""Effect-prediction models: penalized linear, boosted trees, baselines."""
from .baselines import BaselinePredictor, fit_baseline
from .bundle import (
    FAMILIES,
    HyperParams,
    ModelBundle,
    bundle_from_text,
    bundle_to_text,
    feature_importance,
    fit_bundle,
    load_bundle,
    save_bundle,
)
from .gbrt import GBRTParams, RegressionTree, TreeEnsemble, fit_gbrt, fit_tree
from .linear import LinearModel, fit_lasso, fit_ridge, kkt_residual, lambda_max
from .search import (
    GBRTGrid,
    LinearGrid,
    SearchResult,
    SearchRow,
    default_grid,
    grid_search,
    refit_on_train_plus_val,
)

__all__ = [
    "BaselinePredictor",
    "fit_baseline",
    "FAMILIES",
    "HyperParams",
    "ModelBundle",
    "bundle_from_text",
    "bundle_to_text",
    "feature_importance",
    "fit_bundle",
    "load_bundle",
    "save_bundle",
    "GBRTParams",
    "RegressionTree",
    "TreeEnsemble",
    "fit_gbrt",
    "fit_tree",
    "LinearModel",
    "fit_lasso",
    "fit_ridge",
    "kkt_residual",
    "lambda_max",
    "GBRTGrid",
    "LinearGrid",
    "SearchResult",
    "SearchRow",
    "default_grid",
    "grid_search",
    "refit_on_train_plus_val",
]
