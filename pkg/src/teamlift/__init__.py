"""Treatment effects of incentivized team contests on driver productivity.

The package covers the full loop on synthetic data with recorded ground
truth: generate contests, estimate per-driver effects by difference in
differences against randomized solo controls, learn to predict those
effects from pre-contest features, and bootstrap what-if simulations of
alternative contest designs.
"""
from .config import RunConfig, load_config, save_config
from .did import estimate_atet, estimate_ite
from .errors import (
    BudgetError,
    ConfigError,
    GenerationError,
    LeakageError,
    SchemaError,
    TeamliftError,
)
from .evaluate import compare_models, paired_permutation_test, rmse, time_split
from .features import FeatureMatrix, assemble_matrix, base_schema
from .models import fit_bundle, fit_gbrt, fit_lasso, fit_ridge, grid_search, load_bundle
from .pipeline import run_pipeline, run_stage
from .simulate import DesignOverride, enumerate_designs, roi_estimate, simulate_ate
from .synthgen import (
    ContestDataset,
    ContestDesign,
    DGPConfig,
    EffectConfig,
    GroundTruth,
    generate_city,
    generate_contest,
    generate_drivers,
    read_contest_dir,
    write_contest_dir,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "ConfigError",
    "ContestDataset",
    "ContestDesign",
    "DGPConfig",
    "DesignOverride",
    "EffectConfig",
    "FeatureMatrix",
    "GenerationError",
    "GroundTruth",
    "LeakageError",
    "RunConfig",
    "SchemaError",
    "TeamliftError",
    "assemble_matrix",
    "base_schema",
    "compare_models",
    "enumerate_designs",
    "estimate_atet",
    "estimate_ite",
    "fit_bundle",
    "fit_gbrt",
    "fit_lasso",
    "fit_ridge",
    "generate_city",
    "generate_contest",
    "generate_drivers",
    "grid_search",
    "load_bundle",
    "load_config",
    "paired_permutation_test",
    "read_contest_dir",
    "rmse",
    "roi_estimate",
    "run_pipeline",
    "run_stage",
    "save_config",
    "simulate_ate",
    "time_split",
    "write_contest_dir",
    "__version__",
]
