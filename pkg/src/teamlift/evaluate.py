"""Temporal evaluation: contest-level splits, pooled RMSE, and error probes.

Splits are by contest and strictly chronological (train contests end before
the validation window, test contests start after it), so evaluation never
sees effects from contests that overlap a training period.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError
from .features import FeatureMatrix
from .panels import Period

__all__ = [
    "SplitSpec",
    "Split",
    "time_split",
    "rmse",
    "rmse_by_contest",
    "ComparisonRow",
    "compare_models",
    "paired_permutation_test",
    "ErrorRow",
    "ErrorReport",
    "error_analysis",
]


@dataclass(frozen=True)
class SplitSpec:
    train_end: dt.date
    val_start: dt.date
    val_end: dt.date
    test_start: dt.date

    def __post_init__(self) -> None:
        if not (self.train_end < self.val_start <= self.val_end < self.test_start):
            raise ConfigError(
                "split windows must be ordered: train_end < val_start <= val_end < test_start"
            )


@dataclass(frozen=True)
class Split:
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    excluded: tuple[tuple[str, str], ...] = ()  # (contest_id, reason)

    def __post_init__(self) -> None:
        buckets = [set(self.train_ids), set(self.val_ids), set(self.test_ids)]
        for i in range(3):
            for j in range(i + 1, 3):
                overlap = buckets[i] & buckets[j]
                if overlap:
                    raise ConfigError(f"contests assigned to two splits: {sorted(overlap)}")


def time_split(contests: Sequence[tuple[str, Period]], spec: SplitSpec) -> Split:
    """Assign whole contests to train/val/test by their running period.

    Contests straddling a boundary fit no window and are excluded with a
    reason rather than silently dropped or leaked.
    """
    train, val, test, excluded = [], [], [], []
    for contest_id, period in contests:
        if period.end <= spec.train_end:
            train.append(contest_id)
        elif period.start >= spec.test_start:
            test.append(contest_id)
        elif spec.val_start <= period.start and period.end <= spec.val_end:
            val.append(contest_id)
        else:
            excluded.append(
                (contest_id, f"runs {period.start}..{period.end}, straddles a split boundary")
            )
    return Split(
        train_ids=tuple(train),
        val_ids=tuple(val),
        test_ids=tuple(test),
        excluded=tuple(excluded),
    )


def rmse(preds: np.ndarray, y: np.ndarray) -> float:
    """Root mean squared error pooled over all rows."""
    preds = np.asarray(preds, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if preds.shape != y.shape:
        raise ValueError("prediction and label vectors differ in length")
    if preds.size == 0:
        raise ValueError("rmse of zero rows is undefined")
    return float(np.sqrt(np.mean((preds - y) ** 2)))


def rmse_by_contest(matrix: FeatureMatrix, preds: np.ndarray) -> dict[str, float]:
    out: dict[str, float] = {}
    cids = np.array([cid for cid, _ in matrix.keys])
    for cid in matrix.contest_ids():
        mask = cids == cid
        out[cid] = rmse(preds[mask], matrix.y[mask])
    return out


def paired_permutation_test(
    err_a: np.ndarray, err_b: np.ndarray, n_rounds: int = 2000, seed: int = 0
) -> float:
    """Sign-flip permutation p-value for mean squared-error difference.

    Under the null that models a and b are interchangeable per driver, each
    per-driver difference d_i = err_a_i^2 - err_b_i^2 is symmetric around
    zero, so random sign flips give the reference distribution.
    """
    d = np.asarray(err_a, dtype=np.float64) ** 2 - np.asarray(err_b, dtype=np.float64) ** 2
    if d.size == 0:
        raise ValueError("permutation test needs at least one paired row")
    obs = abs(d.mean())
    rng = np.random.default_rng(seed)
    signs = rng.choice((-1.0, 1.0), size=(n_rounds, d.size))
    perm = np.abs((signs * d).mean(axis=1))
    return float((1 + np.sum(perm >= obs)) / (n_rounds + 1))


@dataclass(frozen=True)
class ComparisonRow:
    family: str
    rmse: float
    pct_reduction_vs_baseline: float
    p_vs_baseline: float
    n_rows: int


def compare_models(
    preds_by_family: Mapping[str, np.ndarray],
    y: np.ndarray,
    baseline: str = "uniform",
    n_rounds: int = 2000,
    seed: int = 0,
) -> list[ComparisonRow]:
    """Score every family against the same labels, best RMSE first."""
    if baseline not in preds_by_family:
        raise ValueError(f"baseline family {baseline!r} missing from predictions")
    y = np.asarray(y, dtype=np.float64)
    base_err = np.asarray(preds_by_family[baseline], dtype=np.float64) - y
    base_rmse = rmse(preds_by_family[baseline], y)
    rows = []
    for family, preds in preds_by_family.items():
        err = np.asarray(preds, dtype=np.float64) - y
        family_rmse = rmse(preds, y)
        if family == baseline:
            pct, p = 0.0, 1.0
        else:
            pct = 100.0 * (base_rmse - family_rmse) / base_rmse
            p = paired_permutation_test(err, base_err, n_rounds=n_rounds, seed=seed)
        rows.append(
            ComparisonRow(
                family=family,
                rmse=family_rmse,
                pct_reduction_vs_baseline=pct,
                p_vs_baseline=p,
                n_rows=int(y.size),
            )
        )
    rows.sort(key=lambda r: (r.rmse, r.family))
    return rows


@dataclass(frozen=True)
class ErrorRow:
    feature: str
    kind: str  # continuous | dummy
    stat_signed: float  # pearson r, or two-sample t for dummies
    p_signed: float
    stat_abs: float
    p_abs: float
    undefined: bool = False
    note: str = ""


@dataclass
class ErrorReport:
    rows: list[ErrorRow] = field(default_factory=list)

    def top_abs(self, k: int = 10) -> list[ErrorRow]:
        ranked = [r for r in self.rows if not r.undefined]
        ranked.sort(key=lambda r: -abs(r.stat_abs))
        return ranked[:k]

    def row(self, feature: str) -> ErrorRow:
        for r in self.rows:
            if r.feature == feature:
                return r
        raise KeyError(feature)


def _constant(v: np.ndarray) -> bool:
    # exact test: np.std of a constant column can be a tiny nonzero float
    return bool((v == v[0]).all())


def _assoc(x: np.ndarray, err: np.ndarray, dummy: bool) -> tuple[float, float] | None:
    if dummy:
        ones = err[x == 1.0]
        zeros = err[x == 0.0]
        if ones.size < 2 or zeros.size < 2:
            return None
        if _constant(ones) and _constant(zeros):
            return None
        t, p = stats.ttest_ind(ones, zeros, equal_var=True)
        return float(t), float(p)
    if x.size < 3 or _constant(x) or _constant(err):
        return None
    r, p = stats.pearsonr(x, err)
    return float(r), float(p)


def error_analysis(matrix: FeatureMatrix, preds: np.ndarray) -> ErrorReport:
    """Associate each feature with signed and absolute prediction errors.

    Continuous features are scored by Pearson correlation, 0/1 features by a
    two-sample Student t comparing errors across the two groups. Features
    degenerate on the evaluated rows are flagged instead of scored.
    """
    preds = np.asarray(preds, dtype=np.float64)
    signed = preds - matrix.y
    absolute = np.abs(signed)
    report = ErrorReport()
    for i, col in enumerate(matrix.schema.columns):
        x = matrix.X[:, i]
        s = _assoc(x, signed, col.is_dummy)
        a = _assoc(x, absolute, col.is_dummy)
        if s is None or a is None:
            report.rows.append(
                ErrorRow(
                    feature=col.name,
                    kind="dummy" if col.is_dummy else "continuous",
                    stat_signed=math.nan,
                    p_signed=math.nan,
                    stat_abs=math.nan,
                    p_abs=math.nan,
                    undefined=True,
                    note="degenerate on evaluated rows",
                )
            )
            continue
        report.rows.append(
            ErrorRow(
                feature=col.name,
                kind="dummy" if col.is_dummy else "continuous",
                stat_signed=s[0],
                p_signed=s[1],
                stat_abs=a[0],
                p_abs=a[1],
            )
        )
    return report
