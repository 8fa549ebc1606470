"""Stochastic gradient-boosted regression trees, squared loss, exact splits.

Each round fits a depth-limited CART tree to the current residuals on a
without-replacement subsample, then shrinks it into the ensemble. Split
search is exact: every feature, every distinct-value boundary, gain

    gain = L^2/n_l + R^2/n_r - T^2/n

with L, R, T the residual sums (this is n times the variance reduction).
Ties break to the lowest feature index, then the smallest threshold, so a
fit is a pure function of (data, params, seed). With subsample = 1 each
leaf value is the residual mean of its own training rows, so every round
weakly decreases training loss; the recorded trace makes that checkable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GBRTParams", "RegressionTree", "TreeEnsemble", "fit_tree", "fit_gbrt"]

MIN_GAIN = 1e-12  # guards against float-noise splits on constant residuals


@dataclass(frozen=True)
class GBRTParams:
    n_trees: int = 300
    max_depth: int = 3
    learning_rate: float = 0.1
    subsample: float = 1.0
    min_samples_leaf: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be positive")


class RegressionTree:
    """Binary regression tree over flat node arrays.

    ``feature[k] == -1`` marks a leaf; rows with x[feature] <= threshold go
    left. ``gain`` holds the split gain at internal nodes (impurity
    importance is the per-feature sum of these).
    """

    __slots__ = ("feature", "threshold", "left", "right", "value", "gain")

    def __init__(self, feature, threshold, left, right, value, gain):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.gain = np.asarray(gain, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def importance(self, n_features: int) -> np.ndarray:
        out = np.zeros(n_features)
        internal = self.feature >= 0
        np.add.at(out, self.feature[internal], self.gain[internal])
        return out


def _best_split(
    X: np.ndarray, r: np.ndarray, min_leaf: int
) -> tuple[int, float, float] | None:
    """Exact search over all (feature, boundary) splits; None if no split
    clears the minimum-leaf and positive-gain bars."""
    n = r.shape[0]
    if n < 2 * min_leaf:
        return None
    total = r.sum()
    base = total * total / n
    n_left = np.arange(1, n)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    best_gain = MIN_GAIN
    best: tuple[int, float, float] | None = None
    for j in range(X.shape[1]):
        v = X[:, j]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        left_sums = np.cumsum(r[order])[:-1]
        valid = size_ok & (vs[:-1] < vs[1:])
        if not valid.any():
            continue
        gains = np.where(
            valid, left_sums**2 / n_left + (total - left_sums) ** 2 / n_right - base, -np.inf
        )
        i = int(np.argmax(gains))  # first max: smallest threshold wins in-feature ties
        if gains[i] > best_gain:  # strict: lowest feature index wins cross-feature ties
            best_gain = float(gains[i])
            best = (j, float((vs[i] + vs[i + 1]) / 2.0), best_gain)
    return best


def fit_tree(X: np.ndarray, r: np.ndarray, max_depth: int, min_samples_leaf: int) -> RegressionTree:
    """Greedy CART regression tree on residuals; leaves predict the mean."""
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    gain: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        gain.append(0.0)
        return len(feature) - 1

    def build(idx: np.ndarray, depth: int) -> int:
        k = new_node()
        value[k] = float(r[idx].mean())
        if depth >= max_depth:
            return k
        split = _best_split(X[idx], r[idx], min_samples_leaf)
        if split is None:
            return k
        j, thr, g = split
        mask = X[idx, j] <= thr
        feature[k] = j
        threshold[k] = thr
        gain[k] = g
        left[k] = build(idx[mask], depth + 1)
        right[k] = build(idx[~mask], depth + 1)
        return k

    build(np.arange(X.shape[0]), 0)
    return RegressionTree(feature, threshold, left, right, value, gain)


@dataclass
class TreeEnsemble:
    params: GBRTParams
    init_value: float
    trees: list[RegressionTree] = field(default_factory=list)
    loss_trace: list[float] = field(default_factory=list)  # train MSE, baseline first

    def predict(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        use = self.trees if n_trees is None else self.trees[:n_trees]
        out = np.full(X.shape[0], self.init_value)
        for tree in use:
            out += self.params.learning_rate * tree.predict(X)
        return out

    def staged_predict(self, X: np.ndarray):
        """Yield predictions after each boosting round (round 0 first)."""
        out = np.full(X.shape[0], self.init_value)
        yield out.copy()
        for tree in self.trees:
            out += self.params.learning_rate * tree.predict(X)
            yield out.copy()

    def importance(self, n_features: int) -> np.ndarray:
        """Impurity importance: split-gain totals, normalized to sum to one."""
        raw = np.zeros(n_features)
        for tree in self.trees:
            raw += tree.importance(n_features)
        total = raw.sum()
        return raw / total if total > 0 else raw


def fit_gbrt(X: np.ndarray, y: np.ndarray, params: GBRTParams) -> TreeEnsemble:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    rng = np.random.default_rng(params.seed)
    ensemble = TreeEnsemble(params=params, init_value=float(y.mean()))
    F = np.full(n, ensemble.init_value)
    ensemble.loss_trace.append(float(np.mean((y - F) ** 2)))
    k = max(1, int(round(params.subsample * n)))
    for _ in range(params.n_trees):
        if k < n:
            idx = np.sort(rng.choice(n, size=k, replace=False))
        else:
            idx = np.arange(n)
        resid = y - F
        tree = fit_tree(X[idx], resid[idx], params.max_depth, params.min_samples_leaf)
        F += params.learning_rate * tree.predict(X)
        ensemble.trees.append(tree)
        ensemble.loss_trace.append(float(np.mean((y - F) ** 2)))
    return ensemble
