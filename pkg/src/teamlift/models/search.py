"""Hyperparameter search over a held-out validation window.

Candidates are enumerated simplest-first (stronger penalty, fewer and
shallower trees) and a later candidate must strictly improve validation RMSE
to win, so ties resolve toward the simpler model and the search is fully
deterministic. Lasso paths reuse warm starts; boosted ensembles are fit once
per (depth, rate, subsample) group and scored at each tree-count checkpoint,
which gives identical results to refitting at each size with the same seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..evaluate import rmse
from ..features import FeatureMatrix, concat_matrices, fit_scaler
from .bundle import HyperParams, ModelBundle, fit_bundle
from .gbrt import TreeEnsemble, fit_gbrt
from .linear import fit_lasso, fit_ridge, lambda_max

__all__ = ["SearchRow", "SearchResult", "default_grid", "grid_search", "refit_on_train_plus_val"]

LINEAR_SCALINGS = ("standardize", "minmax", "none")


@dataclass(frozen=True)
class SearchRow:
    params: HyperParams
    val_rmse: float
    n_selected: int | None = None


@dataclass
class SearchResult:
    family: str
    rows: list[SearchRow]
    best: HyperParams
    bundle: ModelBundle

    def best_row(self) -> SearchRow:
        for row in self.rows:
            if row.params == self.best:
                return row
        raise ValueError("best params missing from search rows")


@dataclass(frozen=True)
class GBRTGrid:
    n_trees: tuple[int, ...] = (150, 300)
    max_depth: tuple[int, ...] = (2, 3)
    learning_rate: tuple[float, ...] = (0.1,)
    subsample: tuple[float, ...] = (0.8, 1.0)
    min_samples_leaf: int = 20


@dataclass(frozen=True)
class LinearGrid:
    scalings: tuple[str, ...] = LINEAR_SCALINGS
    n_lambdas: int = 12
    lam_min_ratio: float = 1e-4


def default_grid(family: str) -> GBRTGrid | LinearGrid | None:
    if family == "gbrt":
        return GBRTGrid()
    if family in ("lasso", "ridge"):
        return LinearGrid()
    return None


def _scaled(train: FeatureMatrix, val: FeatureMatrix, scaling: str):
    scaler = fit_scaler(train, scaling)
    return scaler, scaler.transform(train.X), scaler.transform(val.X)


def _bundle_from(train, scaler, Xs, model, params, val_rmse) -> ModelBundle:
    sds = Xs.std(axis=0, ddof=1) if train.n_rows > 1 else np.zeros(Xs.shape[1])
    return ModelBundle(
        params=params,
        scaler=scaler,
        model=model,
        feature_names=train.schema.names(),
        fingerprint=train.schema.fingerprint(),
        column_sds=sds,
        train_rows=train.n_rows,
        val_rmse=val_rmse,
    )


def _search_linear(train, val, family: str, grid: LinearGrid, seed: int) -> SearchResult:
    rows: list[SearchRow] = []
    best_row = None
    best_state = None
    for scaling in grid.scalings:
        scaler, Xs, Vs = _scaled(train, val, scaling)
        lam_hi = lambda_max(Xs, train.y)
        if lam_hi <= 0:
            lam_hi = 1.0
        lams = np.geomspace(lam_hi, lam_hi * grid.lam_min_ratio, grid.n_lambdas)
        warm = None
        for lam in lams:
            lam = float(lam)
            if family == "lasso":
                model = fit_lasso(Xs, train.y, lam, warm_start=warm)
                warm = model
            else:
                model = fit_ridge(Xs, train.y, lam)
            params = HyperParams(family=family, scaling=scaling, lam=lam, seed=seed)
            score = rmse(model.predict(Vs), val.y)
            row = SearchRow(params=params, val_rmse=score, n_selected=model.n_selected())
            rows.append(row)
            if best_row is None or score < best_row.val_rmse:
                best_row = row
                best_state = (scaler, Xs, model)
    scaler, Xs, model = best_state
    bundle = _bundle_from(train, scaler, Xs, model, best_row.params, best_row.val_rmse)
    return SearchResult(family=family, rows=rows, best=best_row.params, bundle=bundle)


def _search_gbrt(train, val, grid: GBRTGrid, seed: int) -> SearchResult:
    # Tree models are invariant to monotone per-column rescaling, so only the
    # raw representation is searched.
    scaler, Xs, Vs = _scaled(train, val, "none")
    checkpoints = tuple(sorted(grid.n_trees))
    max_trees = checkpoints[-1]
    rows: list[SearchRow] = []
    best_row = None
    best_ensemble = None
    for depth in sorted(grid.max_depth):
        for lr in sorted(grid.learning_rate):
            for subsample in sorted(grid.subsample):
                params_full = HyperParams(
                    family="gbrt",
                    scaling="none",
                    n_trees=max_trees,
                    max_depth=depth,
                    learning_rate=lr,
                    subsample=subsample,
                    min_samples_leaf=grid.min_samples_leaf,
                    seed=seed,
                )
                ensemble = fit_gbrt(Xs, train.y, params_full.gbrt_params())
                preds = np.full(val.n_rows, ensemble.init_value)
                scores = {}
                for t, tree in enumerate(ensemble.trees, start=1):
                    preds = preds + lr * tree.predict(Vs)
                    if t in checkpoints:
                        scores[t] = rmse(preds, val.y)
                for t in checkpoints:
                    params = HyperParams(
                        family="gbrt",
                        scaling="none",
                        n_trees=t,
                        max_depth=depth,
                        learning_rate=lr,
                        subsample=subsample,
                        min_samples_leaf=grid.min_samples_leaf,
                        seed=seed,
                    )
                    row = SearchRow(params=params, val_rmse=scores[t])
                    rows.append(row)
                    if best_row is None or row.val_rmse < best_row.val_rmse:
                        best_row = row
                        best_ensemble = ensemble
    # A shorter ensemble with the same seed is an exact prefix of the long
    # fit, so truncation equals refitting at the chosen size.
    chosen = best_row.params
    model = TreeEnsemble(
        params=chosen.gbrt_params(),
        init_value=best_ensemble.init_value,
        trees=best_ensemble.trees[: chosen.n_trees],
        loss_trace=best_ensemble.loss_trace[: chosen.n_trees + 1],
    )
    rows.sort(key=lambda r: (r.params.n_trees, r.params.max_depth, r.params.learning_rate, r.params.subsample))
    bundle = _bundle_from(train, scaler, Xs, model, chosen, best_row.val_rmse)
    return SearchResult(family="gbrt", rows=rows, best=chosen, bundle=bundle)


def _search_baseline(train, val, family: str, seed: int) -> SearchResult:
    params = HyperParams(family=family, scaling="none", seed=seed)
    bundle = fit_bundle(train, params)
    score = rmse(bundle.predict(val), val.y)
    bundle.val_rmse = score
    row = SearchRow(params=params, val_rmse=score)
    return SearchResult(family=family, rows=[row], best=params, bundle=bundle)


def grid_search(
    train: FeatureMatrix,
    val: FeatureMatrix,
    family: str,
    grid: GBRTGrid | LinearGrid | None = None,
    seed: int = 0,
) -> SearchResult:
    """Pick the hyperparameters minimizing validation RMSE for one family."""
    if train.n_rows == 0 or val.n_rows == 0:
        raise ValueError("grid search needs non-empty train and validation matrices")
    if grid is None:
        grid = default_grid(family)
    if family in ("lasso", "ridge"):
        return _search_linear(train, val, family, grid, seed)
    if family == "gbrt":
        return _search_gbrt(train, val, grid, seed)
    if family in ("uniform", "random"):
        return _search_baseline(train, val, family, seed)
    raise ValueError(f"unknown model family {family!r}")


def refit_on_train_plus_val(
    train: FeatureMatrix, val: FeatureMatrix, params: HyperParams
) -> ModelBundle:
    """Refit scaler and model on train+val with tuned hyperparameters."""
    return fit_bundle(concat_matrices(train, val), params)
