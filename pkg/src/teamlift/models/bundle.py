"""Fitted model bundles: scaler + model + schema, with text persistence.

A bundle is the unit the pipeline stores and the simulator consumes. It
always carries the scaler fit on its own training rows and the feature-name
fingerprint, so predictions on raw feature matrices are reproducible and
schema mismatches fail loudly instead of silently misaligning columns.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import SchemaError
from ..features import FeatureMatrix, Scaler, fit_scaler
from .baselines import BaselinePredictor, fit_baseline
from .gbrt import GBRTParams, RegressionTree, TreeEnsemble, fit_gbrt
from .linear import LinearModel, fit_lasso, fit_ridge

__all__ = [
    "HyperParams",
    "ModelBundle",
    "fit_bundle",
    "feature_importance",
    "bundle_to_text",
    "bundle_from_text",
    "save_bundle",
    "load_bundle",
]

FAMILIES = ("lasso", "ridge", "gbrt", "uniform", "random")
FORMAT_VERSION = 1


@dataclass(frozen=True)
class HyperParams:
    family: str
    scaling: str = "standardize"
    lam: float = 0.0
    n_trees: int = 300
    max_depth: int = 3
    learning_rate: float = 0.1
    subsample: float = 1.0
    min_samples_leaf: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")

    def describe(self) -> str:
        if self.family in ("lasso", "ridge"):
            return f"{self.family}(lam={self.lam:.6g},scaling={self.scaling})"
        if self.family == "gbrt":
            return (
                f"gbrt(trees={self.n_trees},depth={self.max_depth},"
                f"lr={self.learning_rate:g},subsample={self.subsample:g})"
            )
        return self.family

    def gbrt_params(self) -> GBRTParams:
        return GBRTParams(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            learning_rate=self.learning_rate,
            subsample=self.subsample,
            min_samples_leaf=self.min_samples_leaf,
            seed=self.seed,
        )


@dataclass
class ModelBundle:
    params: HyperParams
    scaler: Scaler
    model: LinearModel | TreeEnsemble | BaselinePredictor
    feature_names: tuple[str, ...]
    fingerprint: str
    column_sds: np.ndarray  # sds of the scaled train columns, for importances
    train_rows: int
    val_rmse: float | None = None

    @property
    def family(self) -> str:
        return self.params.family

    def predict(self, matrix: FeatureMatrix) -> np.ndarray:
        if matrix.schema.fingerprint() != self.fingerprint:
            raise SchemaError(
                "feature matrix schema does not match the one this model was trained on"
            )
        return self.predict_raw(matrix.X)

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        """Predict from raw (unscaled) feature rows in schema column order."""
        return self.model.predict(self.scaler.transform(X))

    def n_selected(self) -> int | None:
        if isinstance(self.model, LinearModel):
            return self.model.n_selected()
        return None


def fit_bundle(train: FeatureMatrix, params: HyperParams) -> ModelBundle:
    scaler = fit_scaler(train, params.scaling)
    Xs = scaler.transform(train.X)
    y = train.y
    if params.family == "lasso":
        model: LinearModel | TreeEnsemble | BaselinePredictor = fit_lasso(Xs, y, params.lam)
    elif params.family == "ridge":
        model = fit_ridge(Xs, y, params.lam)
    elif params.family == "gbrt":
        model = fit_gbrt(Xs, y, params.gbrt_params())
    else:
        model = fit_baseline(y, params.family, seed=params.seed)
    sds = Xs.std(axis=0, ddof=1) if train.n_rows > 1 else np.zeros(Xs.shape[1])
    return ModelBundle(
        params=params,
        scaler=scaler,
        model=model,
        feature_names=train.schema.names(),
        fingerprint=train.schema.fingerprint(),
        column_sds=sds,
        train_rows=train.n_rows,
    )


def feature_importance(bundle: ModelBundle) -> list[tuple[str, float]]:
    """Per-feature importance, one (name, value) pair per column.

    Linear families report the signed scale-adjusted coefficient
    (coef * column sd); trees report normalized split-gain totals; baselines
    report zeros.
    """
    names = bundle.feature_names
    model = bundle.model
    if isinstance(model, LinearModel):
        vals = model.coef * bundle.column_sds
    elif isinstance(model, TreeEnsemble):
        vals = model.importance(len(names))
    else:
        vals = np.zeros(len(names))
    return [(name, float(v)) for name, v in zip(names, vals)]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _tree_to_obj(tree: RegressionTree) -> dict:
    leaf = tree.feature < 0
    return {
        "feature": tree.feature.tolist(),
        "threshold": [None if leaf[k] else float(tree.threshold[k]) for k in range(tree.n_nodes)],
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
        "gain": tree.gain.tolist(),
    }


def _tree_from_obj(obj: dict) -> RegressionTree:
    thr = [np.nan if t is None else t for t in obj["threshold"]]
    return RegressionTree(
        obj["feature"], thr, obj["left"], obj["right"], obj["value"], obj["gain"]
    )


def _model_to_obj(model) -> dict:
    if isinstance(model, LinearModel):
        return {
            "kind": "linear",
            "penalty": model.penalty,
            "lam": model.lam,
            "intercept": model.intercept,
            "coef": model.coef.tolist(),
            "n_iter": model.n_iter,
            "kkt_residual": model.kkt_residual,
            "converged": model.converged,
        }
    if isinstance(model, TreeEnsemble):
        return {
            "kind": "tree_ensemble",
            "init_value": model.init_value,
            "loss_trace": model.loss_trace,
            "params": {
                "n_trees": model.params.n_trees,
                "max_depth": model.params.max_depth,
                "learning_rate": model.params.learning_rate,
                "subsample": model.params.subsample,
                "min_samples_leaf": model.params.min_samples_leaf,
                "seed": model.params.seed,
            },
            "trees": [_tree_to_obj(t) for t in model.trees],
        }
    if isinstance(model, BaselinePredictor):
        return {
            "kind": "baseline",
            "baseline": model.kind,
            "value": model.value,
            "low": model.low,
            "high": model.high,
            "seed": model.seed,
        }
    raise SchemaError(f"cannot serialize model of type {type(model).__name__}")


def _model_from_obj(obj: dict):
    kind = obj["kind"]
    if kind == "linear":
        return LinearModel(
            penalty=obj["penalty"],
            lam=obj["lam"],
            intercept=obj["intercept"],
            coef=np.array(obj["coef"], dtype=np.float64),
            n_iter=obj["n_iter"],
            kkt_residual=obj["kkt_residual"],
            converged=obj["converged"],
        )
    if kind == "tree_ensemble":
        params = GBRTParams(**obj["params"])
        ens = TreeEnsemble(params=params, init_value=obj["init_value"])
        ens.trees = [_tree_from_obj(t) for t in obj["trees"]]
        ens.loss_trace = list(obj["loss_trace"])
        return ens
    if kind == "baseline":
        return BaselinePredictor(
            kind=obj["baseline"],
            value=obj["value"],
            low=obj["low"],
            high=obj["high"],
            seed=obj["seed"],
        )
    raise SchemaError(f"unknown serialized model kind {kind!r}")


def bundle_to_text(bundle: ModelBundle) -> str:
    obj = {
        "version": FORMAT_VERSION,
        "params": {
            "family": bundle.params.family,
            "scaling": bundle.params.scaling,
            "lam": bundle.params.lam,
            "n_trees": bundle.params.n_trees,
            "max_depth": bundle.params.max_depth,
            "learning_rate": bundle.params.learning_rate,
            "subsample": bundle.params.subsample,
            "min_samples_leaf": bundle.params.min_samples_leaf,
            "seed": bundle.params.seed,
        },
        "scaler": {
            "method": bundle.scaler.method,
            "names": list(bundle.scaler.names),
            "center": bundle.scaler.center.tolist(),
            "scale": bundle.scaler.scale.tolist(),
        },
        "feature_names": list(bundle.feature_names),
        "fingerprint": bundle.fingerprint,
        "column_sds": bundle.column_sds.tolist(),
        "train_rows": bundle.train_rows,
        "val_rmse": bundle.val_rmse,
        "model": _model_to_obj(bundle.model),
    }
    return json.dumps(obj, sort_keys=True, indent=1)


def bundle_from_text(text: str) -> ModelBundle:
    obj = json.loads(text)
    if obj.get("version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version {obj.get('version')!r}")
    params = HyperParams(**obj["params"])
    scaler = Scaler(
        method=obj["scaler"]["method"],
        names=tuple(obj["scaler"]["names"]),
        center=np.array(obj["scaler"]["center"], dtype=np.float64),
        scale=np.array(obj["scaler"]["scale"], dtype=np.float64),
    )
    return ModelBundle(
        params=params,
        scaler=scaler,
        model=_model_from_obj(obj["model"]),
        feature_names=tuple(obj["feature_names"]),
        fingerprint=obj["fingerprint"],
        column_sds=np.array(obj["column_sds"], dtype=np.float64),
        train_rows=obj["train_rows"],
        val_rmse=obj["val_rmse"],
    )


def save_bundle(bundle: ModelBundle, path: Path | str) -> None:
    Path(path).write_text(bundle_to_text(bundle) + "\n")


def load_bundle(path: Path | str) -> ModelBundle:
    return bundle_from_text(Path(path).read_text())
