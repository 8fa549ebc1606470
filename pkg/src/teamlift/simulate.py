"""What-if simulation of alternative contest designs.

A design override rewrites only design-level feature columns of one
contest's matrix; driver, team, and city features stay frozen. The fitted
model then predicts each driver's effect under the rewritten design, a
driver-level bootstrap turns those predictions into an ATE distribution, and
an optional Gaussian residual correction propagates model error into the
interval. Replicate draws depend only on (seed, n_boot, n_rows), so designs
compared at the same seed share common random numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import BudgetError, ConfigError, SchemaError
from .features import FeatureMatrix
from .models.bundle import ModelBundle
from .synthgen import ContestDesign

__all__ = [
    "DesignOverride",
    "NoiseCorrection",
    "SimulationResult",
    "ROIResult",
    "counterfactual_matrix",
    "effective_design",
    "residual_distribution",
    "simulate_ate",
    "enumerate_designs",
    "design_cost",
    "roi_estimate",
]

NOISE_LEVELS = ("none", "period", "contest")


@dataclass(frozen=True)
class DesignOverride:
    """Sparse rewrite of design knobs; None leaves a knob unchanged.

    ``reward_fifth`` turns the rank-5 prize on (a fraction of the rank-4
    prize, keeping the schedule non-increasing) or off; ``include_worst`` is
    the inverse of the exclude-worst-member scoring rule.
    """

    captain_bonus: bool | None = None
    reward_fifth: bool | None = None
    include_worst: bool | None = None
    group_size: int | None = None
    prize_schedule: tuple[float, ...] | None = None
    fifth_prize_frac: float = 0.5

    def __post_init__(self) -> None:
        if self.group_size is not None and self.group_size < 2:
            raise ValueError("group_size override must be at least 2")
        if not 0 < self.fifth_prize_frac <= 1:
            raise ValueError("fifth_prize_frac must be in (0, 1]")
        if self.prize_schedule is not None:
            if len(self.prize_schedule) != 5:
                raise ValueError("prize_schedule override must list 5 amounts")
            if any(a < b for a, b in zip(self.prize_schedule, self.prize_schedule[1:])):
                raise ValueError("prize_schedule override must be non-increasing")

    def is_identity(self) -> bool:
        return (
            self.captain_bonus is None
            and self.reward_fifth is None
            and self.include_worst is None
            and self.group_size is None
            and self.prize_schedule is None
        )

    def label(self) -> str:
        if self.is_identity():
            return "as_run"
        parts = []
        if self.captain_bonus is not None:
            parts.append(f"bonus={'on' if self.captain_bonus else 'off'}")
        if self.reward_fifth is not None:
            parts.append(f"fifth={'on' if self.reward_fifth else 'off'}")
        if self.include_worst is not None:
            parts.append(f"worst={'incl' if self.include_worst else 'excl'}")
        if self.group_size is not None:
            parts.append(f"groups={self.group_size}")
        if self.prize_schedule is not None:
            parts.append("prizes=" + "/".join(f"{p:g}" for p in self.prize_schedule))
        return ",".join(parts)


def effective_design(design: ContestDesign, override: DesignOverride) -> ContestDesign:
    """The contest design after applying an override."""
    prizes = list(override.prize_schedule or design.prize_schedule)
    if override.reward_fifth is not None:
        if override.reward_fifth:
            if prizes[3] <= 0:
                raise ConfigError("cannot reward the 5th team: the rank-4 prize is zero")
            prizes[4] = override.fifth_prize_frac * prizes[3]
        else:
            prizes[4] = 0.0
    return replace(
        design,
        prize_schedule=tuple(prizes),
        captain_bonus=design.captain_bonus if override.captain_bonus is None else override.captain_bonus,
        exclude_worst_member=(
            design.exclude_worst_member
            if override.include_worst is None
            else not override.include_worst
        ),
        group_size=design.group_size if override.group_size is None else override.group_size,
    )


def counterfactual_matrix(
    matrix: FeatureMatrix, design: ContestDesign, override: DesignOverride
) -> FeatureMatrix:
    """Rewrite design-level columns of a single contest's rows.

    Only contest-design columns change; every behavioral, team, and city
    column is carried over untouched.
    """
    if len(matrix.contest_ids()) != 1:
        raise ValueError("counterfactual rewrites apply to a single contest at a time")
    eff = effective_design(design, override)
    X = matrix.X.copy()
    schema = matrix.schema

    def set_col(name: str, value: float) -> None:
        try:
            X[:, schema.index_of(name)] = value
        except SchemaError as exc:
            raise SchemaError(f"matrix lacks design column {name!r}") from exc

    set_col("captain_bonus", float(eff.captain_bonus))
    set_col("exclude_worst_member", float(eff.exclude_worst_member))
    set_col("group_size", float(eff.group_size))
    set_col("rewards_5th_team", float(eff.prize_schedule[4] > 0))
    for r, amount in enumerate(eff.prize_schedule, start=1):
        set_col(f"prize_rank_{r}", float(amount))
    return FeatureMatrix(schema=schema, X=X, y=matrix.y.copy(), keys=list(matrix.keys))


@dataclass(frozen=True)
class NoiseCorrection:
    """Gaussian residual model (actual minus predicted), fit, not assumed."""

    level: str  # none | period | contest
    mean: float = 0.0
    sd: float = 0.0
    n_rows: int = 0

    def __post_init__(self) -> None:
        if self.level not in NOISE_LEVELS:
            raise ValueError(f"unknown noise level {self.level!r}")
        if self.sd < 0:
            raise ValueError("noise sd must be non-negative")


def residual_distribution(
    bundle: ModelBundle,
    matrix: FeatureMatrix,
    level: str,
    contest_id: str | None = None,
) -> NoiseCorrection:
    """Fit the residual mean and sd at the requested pooling level.

    ``period`` pools every row of ``matrix`` (a reference window of past
    contests); ``contest`` restricts to one contest's rows.
    """
    if level == "none":
        return NoiseCorrection(level="none")
    if level == "contest":
        if contest_id is None:
            raise ValueError("contest-level noise needs a contest_id")
        matrix = matrix.subset_by_contests([contest_id])
    if matrix.n_rows < 2:
        raise ValueError(f"need at least 2 rows to fit {level}-level residuals")
    resid = matrix.y - bundle.predict(matrix)
    return NoiseCorrection(
        level=level,
        mean=float(resid.mean()),
        sd=float(resid.std(ddof=1)),
        n_rows=matrix.n_rows,
    )


@dataclass(frozen=True)
class SimulationResult:
    contest_id: str
    label: str
    override: DesignOverride
    noise: NoiseCorrection
    n_boot: int
    seed: int
    n_rows: int
    ate: float  # mean over bootstrap replicates
    ci_low: float
    ci_high: float
    mean_prediction: float  # plain mean predicted effect, no resampling
    replicates: np.ndarray

    def to_kv(self) -> dict[str, object]:
        return {
            "contest_id": self.contest_id,
            "design": self.label,
            "noise_level": self.noise.level,
            "noise_mean": self.noise.mean,
            "noise_sd": self.noise.sd,
            "n_boot": self.n_boot,
            "seed": self.seed,
            "n_drivers": self.n_rows,
            "ate": self.ate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "mean_prediction": self.mean_prediction,
        }


def simulate_ate(
    bundle: ModelBundle,
    matrix: FeatureMatrix,
    design: ContestDesign,
    override: DesignOverride,
    noise: NoiseCorrection,
    n_boot: int = 1000,
    seed: int = 0,
) -> SimulationResult:
    """Bootstrap the ATE of one design variant for one contest.

    Replicates resample drivers with replacement and add the fitted residual
    noise; the point estimate is the replicate mean and the interval the
    2.5/97.5 percentile band.
    """
    if n_boot < 1:
        raise ValueError("n_boot must be positive")
    cf = counterfactual_matrix(matrix, design, override)
    preds = bundle.predict(cf)
    n = preds.shape[0]
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_boot, n))
    ate_b = preds[idx].mean(axis=1)
    if noise.level != "none":
        ate_b = ate_b + rng.normal(noise.mean, noise.sd, size=(n_boot, n)).mean(axis=1)
    lo, hi = np.percentile(ate_b, [2.5, 97.5])
    return SimulationResult(
        contest_id=matrix.contest_ids()[0],
        label=override.label(),
        override=override,
        noise=noise,
        n_boot=n_boot,
        seed=seed,
        n_rows=n,
        ate=float(ate_b.mean()),
        ci_low=float(lo),
        ci_high=float(hi),
        mean_prediction=float(preds.mean()),
        replicates=ate_b,
    )


def enumerate_designs(
    bundle: ModelBundle,
    matrix: FeatureMatrix,
    design: ContestDesign,
    overrides: Sequence[DesignOverride] | None = None,
    noise: NoiseCorrection | None = None,
    n_boot: int = 1000,
    seed: int = 0,
    max_designs: int = 64,
) -> list[SimulationResult]:
    """Simulate a family of design variants under common random numbers.

    Default variants are the full on/off cube of captain bonus, fifth-team
    reward, and worst-member inclusion (8 designs). Results come back sorted
    by estimated ATE, best first.
    """
    if overrides is None:
        overrides = [
            DesignOverride(captain_bonus=cb, reward_fifth=rf, include_worst=iw)
            for cb in (False, True)
            for rf in (False, True)
            for iw in (False, True)
        ]
    if len(overrides) == 0:
        raise ValueError("no design overrides to simulate")
    if len(overrides) > max_designs:
        raise BudgetError(
            f"{len(overrides)} design variants exceed the cap of {max_designs}"
        )
    labels = [o.label() for o in overrides]
    if len(set(labels)) != len(labels):
        raise ValueError("design overrides must be distinct")
    noise = noise or NoiseCorrection(level="none")
    results = [
        simulate_ate(bundle, matrix, design, o, noise, n_boot=n_boot, seed=seed)
        for o in overrides
    ]
    results.sort(key=lambda r: (-r.ate, r.label))
    return results


@dataclass(frozen=True)
class ROIResult:
    roi: float
    ci_low: float
    ci_high: float
    revenue_gain: float
    prize_cost: float


def design_cost(design: ContestDesign, n_teams: int) -> float:
    """Total prize outlay: per-group prize schedule plus any captain bonus."""
    if n_teams < 1:
        raise ValueError("need at least one team")
    n_groups = math.ceil(n_teams / design.group_size)
    per_group = sum(design.prize_schedule)
    if design.captain_bonus:
        per_group += design.captain_bonus_amount
    return n_groups * per_group


def roi_estimate(
    result: SimulationResult,
    design: ContestDesign,
    override: DesignOverride,
    n_teams: int,
    commission_rate: float,
) -> ROIResult:
    """Platform return on prize spend for one simulated design.

    Revenue gain is the summed predicted per-driver effect over contest days
    times the platform's commission share.
    """
    if not 0 < commission_rate <= 1:
        raise ValueError("commission_rate must be in (0, 1]")
    eff = effective_design(design, override)
    cost = design_cost(eff, n_teams)
    if cost <= 0:
        raise ValueError("design has zero prize cost; ROI is undefined")
    scale = result.n_rows * eff.contest_days * commission_rate
    gain = result.ate * scale
    roi_b = result.replicates * scale / cost
    lo, hi = np.percentile(roi_b, [2.5, 97.5])
    return ROIResult(
        roi=gain / cost,
        ci_low=float(lo),
        ci_high=float(hi),
        revenue_gain=gain,
        prize_cost=cost,
    )
