"""Pre-contest feature extraction for effect prediction.

Every behavioral window ends strictly before the team-building (signup)
start, so nothing measured during or after team formation can leak into the
predictors. Contest design parameters and contest-period city weather are
treated as design-time knowledge and are exempt from that firewall.
"""
from __future__ import annotations

import datetime as dt
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import dataio, did, teamstats
from .errors import LeakageError, SchemaError
from .panels import Period, RevenuePanel
from .synthgen import (
    City,
    ContestDataset,
    ContestDesign,
    DriverProfile,
    METRICS,
    PROVINCES,
    Team,
    pair_count_map,
)

__all__ = [
    "FeatureSpec",
    "FeatureSchema",
    "FeatureMatrix",
    "Scaler",
    "base_schema",
    "contest_features",
    "driver_features",
    "team_features",
    "relational_features",
    "city_features",
    "assemble_matrix",
    "fit_scaler",
    "apply_scaler",
    "write_matrix",
    "read_matrix",
]


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    group: str  # contest | driver | team | relational | city
    is_dummy: bool = False


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[FeatureSpec, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names in schema")

    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"unknown feature {name!r}")

    def dummy_mask(self) -> np.ndarray:
        return np.array([c.is_dummy for c in self.columns])

    def group_of(self, name: str) -> str:
        return self.columns[self.index_of(name)].group

    def fingerprint(self) -> str:
        digest = hashlib.sha256("\n".join(self.names()).encode()).hexdigest()
        return digest[:16]

    def __len__(self) -> int:
        return len(self.columns)


def _spec(name: str, group: str, dummy: bool = False) -> FeatureSpec:
    return FeatureSpec(name=name, group=group, is_dummy=dummy)


def base_schema() -> FeatureSchema:
    """The canonical 65-column feature schema."""
    cols: list[FeatureSpec] = []
    cols += [
        _spec("team_size", "contest"),
        _spec("group_size", "contest"),
        _spec("contest_days", "contest"),
        _spec("signup_days", "contest"),
    ]
    cols += [_spec(f"prize_rank_{r}", "contest") for r in range(1, 6)]
    cols += [
        _spec("captain_bonus", "contest", dummy=True),
        _spec("rewards_5th_team", "contest", dummy=True),
        _spec("exclude_worst_member", "contest", dummy=True),
    ]
    cols += [_spec(f"metric_{m}", "contest", dummy=True) for m in METRICS]
    cols += [
        _spec("snowstorm_frac", "contest"),
        _spec("rain_frac", "contest"),
    ]
    for field in ("rev", "rides", "hours"):
        for window in ("base", "7d", "30d"):
            cols.append(_spec(f"{field}_{window}_mean", "driver"))
            cols.append(_spec(f"{field}_{window}_sd", "driver"))
    cols += [
        _spec("age", "driver"),
        _spec("gender_female", "driver", dummy=True),
        _spec("gender_male", "driver", dummy=True),
        _spec("platform_age_months", "driver"),
        _spec("rental_car", "driver", dummy=True),
        _spec("prev_contest_rev", "driver"),
        _spec("no_prior_contest", "driver", dummy=True),
        _spec("is_captain", "driver", dummy=True),
    ]
    cols += [
        _spec("team_n_members", "team"),
        _spec("formation_system", "team", dummy=True),
        _spec("age_diversity", "team"),
        _spec("hometown_diversity", "team"),
        _spec("hometown_homophily", "team"),
        _spec("region_homophily", "team"),
        _spec("team_history", "team"),
        _spec("team_prod_mean", "team"),
        _spec("team_prod_sum", "team"),
    ]
    cols += [
        _spec("diff_from_team_avg", "relational"),
        _spec("diff_from_team_max", "relational"),
        _spec("gap_to_group_top", "relational"),
    ]
    cols += [
        _spec("population_tier", "city"),
        _spec("supply_demand_ratio", "city"),
        _spec("avg_hourly_pay", "city"),
        _spec("n_prior_contests", "city"),
    ]
    cols += [_spec(f"province_{p}", "city", dummy=True) for p in PROVINCES]
    return FeatureSchema(columns=tuple(cols))


def _firewall(window: Period, signup_start: dt.date) -> Period:
    if window.end >= signup_start:
        raise LeakageError(
            f"feature window {window} reaches the team-building start {signup_start}"
        )
    return window


# ---------------------------------------------------------------------------
# Feature blocks
# ---------------------------------------------------------------------------


def contest_features(design: ContestDesign, city: City) -> dict[str, float]:
    fracs = city.weather.fractions(design.contest_period())
    out = {
        "team_size": float(design.team_size),
        "group_size": float(design.group_size),
        "contest_days": float(design.contest_days),
        "signup_days": float(design.signup_days),
        "captain_bonus": float(design.captain_bonus),
        "rewards_5th_team": float(design.prize_schedule[4] > 0),
        "exclude_worst_member": float(design.exclude_worst_member),
        "snowstorm_frac": fracs["snowstorm"],
        "rain_frac": fracs["rain"],
    }
    for r, amount in enumerate(design.prize_schedule, start=1):
        out[f"prize_rank_{r}"] = float(amount)
    for m in METRICS:
        out[f"metric_{m}"] = float(design.performance_metric == m)
    return out


def driver_features(
    driver: DriverProfile,
    panel: RevenuePanel,
    design: ContestDesign,
    is_captain: bool,
) -> dict[str, float]:
    """Behavioral and demographic features from strictly pre-signup data."""
    t_k = design.signup_start()
    t0 = _firewall(did.baseline_period(design.contest_period(), t_k), t_k)
    w7 = _firewall(Period(t_k - dt.timedelta(days=7), t_k - dt.timedelta(days=1)), t_k)
    w30 = _firewall(Period(t_k - dt.timedelta(days=30), t_k - dt.timedelta(days=1)), t_k)
    out: dict[str, float] = {}
    for field, prefix in (("revenue", "rev"), ("rides", "rides"), ("hours", "hours")):
        for window, label in ((t0, "base"), (w7, "7d"), (w30, "30d")):
            vec = panel.daily_values(window, field)
            out[f"{prefix}_{label}_mean"] = float(vec.mean())
            out[f"{prefix}_{label}_sd"] = float(vec.std(ddof=1)) if vec.size > 1 else 0.0
    out.update(
        {
            "age": float(driver.age),
            "gender_female": float(driver.gender == "female"),
            "gender_male": float(driver.gender == "male"),
            "platform_age_months": float(driver.platform_age_months),
            "rental_car": float(driver.rental_car),
            "prev_contest_rev": float(driver.prev_contest_revenue or 0.0),
            "no_prior_contest": float(driver.prev_contest_revenue is None),
            "is_captain": float(is_captain),
        }
    )
    return out


def team_features(
    driver: DriverProfile,
    team: Team,
    members: Sequence[DriverProfile],
    pair_counts: Mapping[tuple[str, str], int],
    base_means: Mapping[str, float],
) -> dict[str, float]:
    """Team-composition features; homophily is relative to the focal driver."""
    member_means = np.array([base_means[m.id] for m in members])
    teammate_hometowns = [m.hometown for m in members if m.id != driver.id]
    return {
        "team_n_members": float(team.size),
        "formation_system": float(team.formation == "system_formed"),
        "age_diversity": teamstats.age_diversity([m.age for m in members]),
        "hometown_diversity": teamstats.hometown_diversity([m.hometown for m in members]),
        "hometown_homophily": teamstats.hometown_homophily(driver.hometown, teammate_hometowns),
        "region_homophily": teamstats.region_homophily([m.activity_region for m in members]),
        "team_history": teamstats.team_history([m.id for m in members], pair_counts),
        "team_prod_mean": float(member_means.mean()),
        "team_prod_sum": float(member_means.sum()),
    }


def relational_features(
    own_base_mean: float, member_means: Sequence[float], team_score: float, group_top: float
) -> dict[str, float]:
    arr = np.asarray(member_means, dtype=np.float64)
    return {
        "diff_from_team_avg": own_base_mean - float(arr.mean()),
        "diff_from_team_max": own_base_mean - float(arr.max()),
        "gap_to_group_top": team_score - group_top,
    }


def city_features(city: City) -> dict[str, float]:
    out = {
        "population_tier": float(city.population_tier),
        "supply_demand_ratio": city.supply_demand_ratio,
        "avg_hourly_pay": city.avg_hourly_pay,
        "n_prior_contests": float(city.n_prior_contests),
    }
    for p in PROVINCES:
        out[f"province_{p}"] = float(city.province == p)
    return out


# ---------------------------------------------------------------------------
# Matrix assembly
# ---------------------------------------------------------------------------


@dataclass
class FeatureMatrix:
    schema: FeatureSchema
    X: np.ndarray  # (n_rows, n_features) raw, unscaled
    y: np.ndarray  # (n_rows,) estimated individual effects
    keys: list[tuple[str, str]]  # (contest_id, driver_id) per row

    def __post_init__(self) -> None:
        if self.X.shape != (len(self.keys), len(self.schema)):
            raise SchemaError(
                f"matrix shape {self.X.shape} does not match "
                f"{len(self.keys)} rows x {len(self.schema)} features"
            )
        if self.y.shape[0] != len(self.keys):
            raise SchemaError("label vector length does not match rows")

    @property
    def n_rows(self) -> int:
        return len(self.keys)

    def contest_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for cid, _ in self.keys:
            seen.setdefault(cid)
        return list(seen)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.schema.index_of(name)]

    def subset_by_contests(self, contest_ids: Sequence[str]) -> "FeatureMatrix":
        wanted = set(contest_ids)
        rows = [i for i, (cid, _) in enumerate(self.keys) if cid in wanted]
        return FeatureMatrix(
            schema=self.schema,
            X=self.X[rows],
            y=self.y[rows],
            keys=[self.keys[i] for i in rows],
        )


def concat_matrices(a: FeatureMatrix, b: FeatureMatrix) -> FeatureMatrix:
    """Stack two matrices over the same schema, rows re-sorted by key so the
    result does not depend on which side rows came from."""
    if a.schema.names() != b.schema.names():
        raise SchemaError("cannot concatenate matrices with different schemas")
    keys = a.keys + b.keys
    if len(set(keys)) != len(keys):
        raise SchemaError("concatenated matrices share (contest_id, driver_id) rows")
    X = np.concatenate([a.X, b.X], axis=0)
    y = np.concatenate([a.y, b.y])
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    return FeatureMatrix(
        schema=a.schema, X=X[order], y=y[order], keys=[keys[i] for i in order]
    )


def assemble_matrix(
    datasets: Sequence[ContestDataset],
    records: Sequence[did.ITERecord],
    schema: FeatureSchema | None = None,
) -> FeatureMatrix:
    """Join estimated effects with pre-contest features, one row per treated
    driver, rows sorted by (contest_id, driver_id)."""
    schema = schema or base_schema()
    by_contest = {ds.contest_id: ds for ds in datasets}
    labels: dict[tuple[str, str], float] = {}
    for rec in records:
        if rec.contest_id not in by_contest:
            raise SchemaError(f"effect record references unknown contest {rec.contest_id}")
        labels[(rec.contest_id, rec.driver_id)] = rec.ite

    names = schema.names()
    rows: list[np.ndarray] = []
    keys: list[tuple[str, str]] = []
    y: list[float] = []
    for ds in datasets:
        design, city = ds.design, ds.city
        block_contest = contest_features(design, city)
        block_city = city_features(city)
        pair_counts = pair_count_map(ds.coteam_history)
        t0 = did.baseline_period(design.contest_period(), design.signup_start())
        base_means = {
            driver_id: float(panel.daily_values(t0).mean())
            for driver_id, panel in ds.panels.items()
        }
        team_scores = {
            t.id: sum(base_means[m] for m in t.all_member_ids()) for t in ds.teams
        }
        group_top: dict[str, float] = {}
        for g in ds.contest_groups:
            top = max(team_scores[tid] for tid in g.team_ids)
            for tid in g.team_ids:
                group_top[tid] = top
        for team in ds.teams:
            try:
                members = [ds.drivers[m] for m in team.all_member_ids()]
            except KeyError as exc:
                raise SchemaError(f"team {team.id} references unknown driver {exc}") from exc
            member_means = [base_means[m.id] for m in members]
            for driver in members:
                key = (ds.contest_id, driver.id)
                if key not in labels:
                    continue
                values = dict(block_contest)
                values.update(block_city)
                values.update(
                    driver_features(
                        driver, ds.panels[driver.id], design, team.captain_id == driver.id
                    )
                )
                values.update(team_features(driver, team, members, pair_counts, base_means))
                values.update(
                    relational_features(
                        base_means[driver.id],
                        member_means,
                        team_scores[team.id],
                        group_top[team.id],
                    )
                )
                rows.append(np.array([values[n] for n in names]))
                keys.append(key)
                y.append(labels[key])

    order = sorted(range(len(keys)), key=lambda i: keys[i])
    X = np.array([rows[i] for i in order]) if rows else np.zeros((0, len(schema)))
    return FeatureMatrix(
        schema=schema,
        X=X,
        y=np.array([y[i] for i in order]),
        keys=[keys[i] for i in order],
    )


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scaler:
    """Column-wise affine transform fit on training rows only.

    Dummy columns pass through untouched; constant columns map to zero so no
    scaled column can blow up.
    """

    method: str  # standardize | minmax | none
    names: tuple[str, ...]
    center: np.ndarray
    scale: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != len(self.names):
            raise SchemaError(
                f"scaler fit on {len(self.names)} columns, got {X.shape[1]}"
            )
        return (X - self.center) / self.scale

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.scale + self.center


SCALER_METHODS = ("standardize", "minmax", "none")


def fit_scaler(matrix: FeatureMatrix, method: str) -> Scaler:
    if method not in SCALER_METHODS:
        raise SchemaError(f"unknown scaling method {method!r}")
    n_cols = len(matrix.schema)
    center = np.zeros(n_cols)
    scale = np.ones(n_cols)
    if method != "none" and matrix.n_rows > 0:
        dummies = matrix.schema.dummy_mask()
        X = matrix.X
        # exact test: the sd of a constant column can round to a tiny nonzero
        const = (X == X[0]).all(axis=0)
        if method == "standardize":
            mean = X.mean(axis=0)
            sd = X.std(axis=0, ddof=1) if matrix.n_rows > 1 else np.zeros(n_cols)
            # constant non-dummy columns center to their value: scaled value 0
            center = np.where(dummies, 0.0, np.where(const, X[0], mean))
            scale = np.where(dummies | const | (sd == 0), 1.0, sd)
        else:  # minmax
            lo = X.min(axis=0)
            span = X.max(axis=0) - lo
            center = np.where(dummies, 0.0, lo)
            scale = np.where(dummies | const | (span == 0), 1.0, span)
    return Scaler(method=method, names=matrix.schema.names(), center=center, scale=scale)


def apply_scaler(scaler: Scaler, matrix: FeatureMatrix) -> np.ndarray:
    if scaler.names != matrix.schema.names():
        raise SchemaError("scaler was fit on a different feature schema")
    return scaler.transform(matrix.X)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def write_matrix(matrix: FeatureMatrix, path: Path | str) -> None:
    header = ["contest_id", "driver_id", "ite", *matrix.schema.names()]
    rows = []
    for i, (cid, did_) in enumerate(matrix.keys):
        rows.append((cid, did_, float(matrix.y[i]), *[float(v) for v in matrix.X[i]]))
    dataio.write_table(path, header, rows)


def write_schema(schema: FeatureSchema, path: Path | str) -> None:
    dataio.write_table(
        path,
        ["name", "group", "is_dummy"],
        [(c.name, c.group, c.is_dummy) for c in schema.columns],
    )


def read_schema(path: Path | str) -> FeatureSchema:
    _, rows = dataio.read_table(path)
    return FeatureSchema(
        columns=tuple(
            FeatureSpec(name=r[0], group=r[1], is_dummy=dataio.parse_bool(r[2])) for r in rows
        )
    )


def read_matrix(path: Path | str, schema: FeatureSchema | None = None) -> FeatureMatrix:
    header, rows = dataio.read_table(path)
    names = tuple(header[3:])
    if schema is None:
        ref = base_schema()
        if names == ref.names():
            schema = ref
        else:
            schema = FeatureSchema(
                columns=tuple(FeatureSpec(name=n, group="unknown") for n in names)
            )
    elif schema.names() != names:
        raise SchemaError("matrix columns do not match the provided schema")
    keys = [(r[0], r[1]) for r in rows]
    y = np.array([float(r[2]) for r in rows])
    X = (
        np.array([[float(v) for v in r[3:]] for r in rows])
        if rows
        else np.zeros((0, len(names)))
    )
    return FeatureMatrix(schema=schema, X=X, y=y, keys=keys)
