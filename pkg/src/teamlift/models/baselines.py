"""Reference predictors the learned models must beat."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BaselinePredictor", "fit_baseline"]


@dataclass
class BaselinePredictor:
    """uniform: every driver gets the train-mean effect.
    random: i.i.d. uniform draws over the train label range, reseeded on
    every call so repeated predictions are reproducible."""

    kind: str  # uniform | random
    value: float = 0.0
    low: float = 0.0
    high: float = 0.0
    seed: int = 0

    def predict(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        if self.kind == "uniform":
            return np.full(n, self.value)
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.low, self.high, n)


def fit_baseline(y: np.ndarray, kind: str, seed: int = 0) -> BaselinePredictor:
    if kind not in ("uniform", "random"):
        raise ValueError(f"unknown baseline kind {kind!r}")
    y = np.asarray(y, dtype=np.float64)
    return BaselinePredictor(
        kind=kind,
        value=float(y.mean()),
        low=float(y.min()),
        high=float(y.max()),
        seed=seed,
    )
