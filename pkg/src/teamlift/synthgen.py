"""Synthetic cities, drivers, contests, and revenue panels with known effects.

The generator plants a configurable treatment-effect function on top of a
counterfactual revenue process and records the realized per-driver effects in
a ground-truth sidecar, so every downstream estimator can be verified against
an oracle. All generation is a pure function of (config, seed).
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import dataio, did, teamstats
from .errors import ConfigError, GenerationError
from .panels import Period, RevenuePanel

__all__ = [
    "PROVINCES",
    "REGIONS",
    "GENDERS",
    "METRICS",
    "WEATHER_KINDS",
    "EFFECT_FEATURES",
    "WeatherSeries",
    "City",
    "DriverProfile",
    "ContestDesign",
    "Team",
    "ContestGroup",
    "ContestDataset",
    "GroundTruth",
    "CityConfig",
    "PanelConfig",
    "EffectConfig",
    "DGPConfig",
    "CityPool",
    "generate_city",
    "generate_drivers",
    "generate_prior_history",
    "generate_city_pool",
    "assign_system_teams",
    "partition_contest_groups",
    "generate_contest",
    "effect_feature_values",
    "write_contest_dir",
    "read_contest_dir",
    "design_from_manifest",
    "read_manifest",
]

PROVINCES = ("P1", "P2", "P3", "P4", "P5", "P6")
REGIONS = ("Z1", "Z2", "Z3", "Z4", "Z5", "Z6", "Z7", "Z8")
GENDERS = ("male", "female")
METRICS = ("revenue", "rides", "blend")
WEATHER_KINDS = ("clear", "rain", "snowstorm")
SNOW_MONTHS = (11, 12, 1, 2, 3)

# Names the planted effect function may reference. Each one is also a column
# of the extracted feature matrix, computed with identical definitions, so a
# planted signal is recoverable by the predictive models.
EFFECT_FEATURES = frozenset(
    {
        "team_size",
        "group_size",
        "contest_days",
        "prize_rank_1",
        "captain_bonus",
        "rewards_5th_team",
        "exclude_worst_member",
        "snowstorm_frac",
        "rain_frac",
        "rev_base_mean",
        "rev_30d_mean",
        "rev_30d_sd",
        "rides_30d_mean",
        "hours_30d_mean",
        "age",
        "gender_female",
        "platform_age_months",
        "rental_car",
        "prev_contest_rev",
        "no_prior_contest",
        "is_captain",
        "formation_system",
        "age_diversity",
        "hometown_diversity",
        "hometown_homophily",
        "region_homophily",
        "team_history",
        "team_prod_mean",
        "diff_from_team_avg",
        "diff_from_team_max",
        "gap_to_group_top",
        "population_tier",
        "supply_demand_ratio",
        "avg_hourly_pay",
        "n_prior_contests",
    }
)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeatherSeries:
    """Per-day weather condition over a contiguous date range."""

    start: dt.date
    conditions: tuple[str, ...]

    def __post_init__(self) -> None:
        bad = set(self.conditions) - set(WEATHER_KINDS)
        if bad:
            raise ValueError(f"unknown weather conditions: {sorted(bad)}")

    @property
    def end(self) -> dt.date:
        return self.start + dt.timedelta(days=len(self.conditions) - 1)

    def covers(self, period: Period) -> bool:
        return self.start <= period.start and period.end <= self.end

    def condition_on(self, day: dt.date) -> str:
        idx = (day - self.start).days
        if idx < 0 or idx >= len(self.conditions):
            raise KeyError(f"no weather recorded for {day}")
        return self.conditions[idx]

    def slice(self, period: Period) -> tuple[str, ...]:
        if not self.covers(period):
            raise KeyError(f"weather does not cover {period}")
        i0 = (period.start - self.start).days
        return self.conditions[i0 : i0 + period.n_days]

    def fractions(self, period: Period) -> dict[str, float]:
        conds = self.slice(period)
        return {kind: conds.count(kind) / len(conds) for kind in WEATHER_KINDS}


@dataclass(frozen=True)
class City:
    id: str
    province: str
    population_tier: int
    supply_demand_ratio: float
    avg_hourly_pay: float
    n_prior_contests: int
    weather: WeatherSeries

    def __post_init__(self) -> None:
        if self.supply_demand_ratio <= 0:
            raise ValueError("supply_demand_ratio must be positive")
        if self.avg_hourly_pay <= 0:
            raise ValueError("avg_hourly_pay must be positive")
        if not 1 <= self.population_tier <= 5:
            raise ValueError("population_tier must be in 1..5")
        if self.n_prior_contests < 0:
            raise ValueError("n_prior_contests must be non-negative")


@dataclass(frozen=True)
class DriverProfile:
    """One driver. The ``latent_*`` fields are hidden DGP parameters: they are
    serialized only in the ground-truth sidecar, never in the analyst-facing
    tables."""

    id: str
    age: int
    gender: str
    platform_age_months: int
    hometown: str
    activity_region: str
    rental_car: bool
    city_id: str
    prev_contest_revenue: float | None = None
    latent_effort_response: float = 0.0
    latent_daily_revenue: float = 0.0

    def __post_init__(self) -> None:
        if not 18 <= self.age <= 75:
            raise ValueError(f"driver age {self.age} outside 18..75")
        if self.platform_age_months < 0:
            raise ValueError("platform_age_months must be non-negative")
        if self.gender not in GENDERS:
            raise ValueError(f"unknown gender {self.gender!r}")


@dataclass(frozen=True)
class ContestDesign:
    team_size: int
    group_size: int
    contest_days: int
    start_date: dt.date
    signup_days: int
    prize_schedule: tuple[float, float, float, float, float]
    captain_bonus: bool
    exclude_worst_member: bool
    performance_metric: str
    captain_bonus_amount: float = 0.0

    def __post_init__(self) -> None:
        if not 3 <= self.team_size <= 8:
            raise ValueError("team_size must be in 3..8 (captain plus 2 to 7 members)")
        if self.group_size < 2:
            raise ValueError("group_size must be at least 2")
        if self.contest_days < 1:
            raise ValueError("contest_days must be at least 1")
        if not 3 <= self.signup_days <= 7:
            raise ValueError("signup_days must be in 3..7")
        if len(self.prize_schedule) != 5:
            raise ValueError("prize_schedule must list amounts for ranks 1..5")
        if any(p < 0 for p in self.prize_schedule):
            raise ValueError("prizes must be non-negative")
        if any(a < b for a, b in zip(self.prize_schedule, self.prize_schedule[1:])):
            raise ValueError("prize_schedule must be non-increasing by rank")
        if self.performance_metric not in METRICS:
            raise ValueError(f"unknown performance metric {self.performance_metric!r}")
        if self.captain_bonus_amount < 0:
            raise ValueError("captain_bonus_amount must be non-negative")

    def contest_period(self) -> Period:
        return Period(self.start_date, self.start_date + dt.timedelta(days=self.contest_days - 1))

    def signup_start(self) -> dt.date:
        return self.start_date - dt.timedelta(days=self.signup_days)


@dataclass(frozen=True)
class Team:
    id: str
    contest_id: str
    captain_id: str
    member_ids: tuple[str, ...]
    formation: str  # self_formed | system_formed

    def __post_init__(self) -> None:
        if self.captain_id in self.member_ids:
            raise ValueError("captain must not be repeated in member_ids")
        if len(set(self.member_ids)) != len(self.member_ids):
            raise ValueError("duplicate member ids")
        if self.formation not in ("self_formed", "system_formed"):
            raise ValueError(f"unknown formation {self.formation!r}")

    def all_member_ids(self) -> tuple[str, ...]:
        return (self.captain_id,) + self.member_ids

    @property
    def size(self) -> int:
        return 1 + len(self.member_ids)


@dataclass(frozen=True)
class ContestGroup:
    index: int
    team_ids: tuple[str, ...]
    productivity: tuple[float, ...]  # summed member pre-contest mean daily revenue
    ratio: float  # max/min pre-contest productivity inside the group
    short: bool  # fewer teams than the design group size


@dataclass
class ContestDataset:
    contest_id: str
    design: ContestDesign
    city: City
    drivers: dict[str, DriverProfile]
    teams: list[Team]
    contest_groups: list[ContestGroup]
    solo_ids: list[str]  # randomized 10% holdout: the control group
    overflow_ids: list[str]  # leftover unteamed drivers, excluded from control
    panels: dict[str, RevenuePanel]
    coteam_history: tuple[tuple[str, str, str], ...] = ()

    def contest_period(self) -> Period:
        return self.design.contest_period()

    def signup_start(self) -> dt.date:
        return self.design.signup_start()

    def treated_ids(self) -> list[str]:
        out: list[str] = []
        for team in self.teams:
            out.extend(team.all_member_ids())
        return out

    def n_participants(self) -> int:
        return len(self.treated_ids()) + len(self.solo_ids) + len(self.overflow_ids)


@dataclass(frozen=True)
class GroundTruth:
    contest_id: str
    ites: dict[str, float]  # realized per-driver true effect, units/day
    atet: float
    dgp_seed: int
    effect: "EffectConfig"

    def __post_init__(self) -> None:
        if self.ites:
            # Summation order is fixed (sorted ids) so the identity survives
            # serialization round-trips bit for bit.
            mean = float(np.mean([self.ites[k] for k in sorted(self.ites)]))
            if mean != self.atet:
                raise ValueError("stored ATET must equal the mean of per-driver ITEs")


# ---------------------------------------------------------------------------
# Generator configuration
# ---------------------------------------------------------------------------


def _check_range(name: str, rng: tuple[float, float]) -> None:
    if rng[0] > rng[1]:
        raise ConfigError(f"{name}: min {rng[0]} > max {rng[1]}")


@dataclass(frozen=True)
class CityConfig:
    """Sampling ranges for city traits and the weather window."""

    window_start: dt.date = dt.date(2018, 1, 1)
    window_days: int = 300
    provinces: tuple[str, ...] = PROVINCES
    population_tier: tuple[int, int] = (1, 5)
    supply_demand_ratio: tuple[float, float] = (0.6, 1.6)
    avg_hourly_pay: tuple[float, float] = (25.0, 60.0)
    n_prior_contests: tuple[int, int] = (1, 10)
    rain_prob: tuple[float, float] = (0.05, 0.25)
    snow_prob_winter: tuple[float, float] = (0.02, 0.20)

    def validate(self) -> None:
        if self.window_days < 1:
            raise ConfigError("window_days must be positive")
        if not self.provinces:
            raise ConfigError("provinces must be non-empty")
        for name in (
            "population_tier",
            "supply_demand_ratio",
            "avg_hourly_pay",
            "n_prior_contests",
            "rain_prob",
            "snow_prob_winter",
        ):
            _check_range(name, getattr(self, name))
        if self.supply_demand_ratio[0] <= 0 or self.avg_hourly_pay[0] <= 0:
            raise ConfigError("supply_demand_ratio and avg_hourly_pay must be positive")


@dataclass(frozen=True)
class PanelConfig:
    """Counterfactual daily-revenue process."""

    noise_sigma: float = 0.22  # lognormal sigma of the day-level multiplier
    offline_prob: float = 0.06
    dow_multipliers: tuple[float, ...] = (0.95, 0.92, 0.95, 1.0, 1.08, 1.15, 0.97)
    weather_multipliers: tuple[float, float, float] = (1.0, 1.03, 0.55)  # clear, rain, snowstorm
    back_days: int = 45  # panel history before the contest start
    fare_range: tuple[float, float] = (18.0, 30.0)

    def validate(self) -> None:
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if not 0 <= self.offline_prob < 1:
            raise ConfigError("offline_prob must be in [0, 1)")
        if len(self.dow_multipliers) != 7:
            raise ConfigError("dow_multipliers must have 7 entries (Mon..Sun)")
        if len(self.weather_multipliers) != len(WEATHER_KINDS):
            raise ConfigError("weather_multipliers must match weather kinds")
        if self.back_days < 38:
            raise ConfigError("back_days must cover the 30-day window plus signup")
        _check_range("fare_range", self.fare_range)

    def weather_multiplier(self, condition: str) -> float:
        return self.weather_multipliers[WEATHER_KINDS.index(condition)]


@dataclass(frozen=True)
class EffectConfig:
    """Planted treatment-effect function: linear + pairwise interactions.

    tau_i = base + sum c_f * x_f + sum c_fg * x_f * x_g + noise_sd * latent_i
    where every referenced name is one of EFFECT_FEATURES and latent_i is the
    driver's hidden effort-response draw.
    """

    base: float = 0.0
    linear: tuple[tuple[str, float], ...] = ()
    interactions: tuple[tuple[str, str, float], ...] = ()
    noise_sd: float = 0.0

    def validate(self) -> None:
        names = [n for n, _ in self.linear]
        names += [a for a, _, _ in self.interactions] + [b for _, b, _ in self.interactions]
        unknown = sorted(set(names) - EFFECT_FEATURES)
        if unknown:
            raise ConfigError(f"effect references unknown features: {unknown}")
        if self.noise_sd < 0:
            raise ConfigError("effect noise_sd must be non-negative")

    def evaluate(self, values: Mapping[str, float], latent: float) -> float:
        tau = self.base
        for name, coef in self.linear:
            tau += coef * values[name]
        for a, b, coef in self.interactions:
            tau += coef * values[a] * values[b]
        return tau + self.noise_sd * latent

    @classmethod
    def constant(cls, tau: float) -> "EffectConfig":
        return cls(base=tau)

    @classmethod
    def null(cls) -> "EffectConfig":
        return cls()

    @classmethod
    def plausible_default(cls) -> "EffectConfig":
        """Heterogeneous effect with sign choices mirroring reported findings:
        snowstorms and oversupply hurt, captains and homophily help, extra
        bonuses backfire, and team history follows an inverse U."""
        return cls(
            base=12.0,
            linear=(
                ("snowstorm_frac", -35.0),
                ("supply_demand_ratio", -9.0),
                ("rev_30d_sd", 0.06),
                ("diff_from_team_avg", -0.05),
                ("gap_to_group_top", 0.004),
                ("is_captain", 6.0),
                ("formation_system", -5.0),
                ("rental_car", 4.0),
                ("captain_bonus", -4.0),
                ("rewards_5th_team", -5.0),
                ("exclude_worst_member", -4.0),
                ("region_homophily", 8.0),
                ("platform_age_months", 0.05),
                ("age", 0.8),
                ("team_history", 4.0),
            ),
            interactions=(
                ("age", "age", -0.01),
                ("team_history", "team_history", -2.0),
            ),
            noise_sd=4.0,
        )


@dataclass(frozen=True)
class DGPConfig:
    panel: PanelConfig = field(default_factory=PanelConfig)
    effect: EffectConfig = field(default_factory=EffectConfig.plausible_default)
    self_form_frac: float = 0.5
    holdout_frac: float = 0.10

    def validate(self) -> None:
        self.panel.validate()
        self.effect.validate()
        if not 0 <= self.self_form_frac < 1:
            raise ConfigError("self_form_frac must be in [0, 1)")
        if not 0 < self.holdout_frac < 1:
            raise ConfigError("holdout_frac must be in (0, 1)")


# ---------------------------------------------------------------------------
# City, driver, and history generation
# ---------------------------------------------------------------------------


def generate_city(config: CityConfig, seed: int, city_id: str = "city1") -> City:
    """Deterministically sample one city (traits plus a daily weather series)."""
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF]))
    province = config.provinces[int(rng.integers(0, len(config.provinces)))]
    tier = int(rng.integers(config.population_tier[0], config.population_tier[1] + 1))
    sdr = float(rng.uniform(*config.supply_demand_ratio))
    pay = float(rng.uniform(*config.avg_hourly_pay))
    n_prior = int(rng.integers(config.n_prior_contests[0], config.n_prior_contests[1] + 1))
    rain_p = float(rng.uniform(*config.rain_prob))
    snow_p = float(rng.uniform(*config.snow_prob_winter))

    days = [config.window_start + dt.timedelta(days=i) for i in range(config.window_days)]
    u = rng.random(config.window_days)
    conditions = []
    for day, x in zip(days, u):
        snow_possible = day.month in SNOW_MONTHS
        if snow_possible and x < snow_p:
            conditions.append("snowstorm")
        elif x < (snow_p if snow_possible else 0.0) + rain_p:
            conditions.append("rain")
        else:
            conditions.append("clear")

    return City(
        id=city_id,
        province=province,
        population_tier=tier,
        supply_demand_ratio=sdr,
        avg_hourly_pay=pay,
        n_prior_contests=n_prior,
        weather=WeatherSeries(start=config.window_start, conditions=tuple(conditions)),
    )


def _hometown_codes(province: str) -> list[str]:
    return [f"H-{province}-{i}" for i in range(1, 5)]


def generate_drivers(city: City, n: int, seed: int) -> list[DriverProfile]:
    """Sample ``n`` driver profiles for a city, including hidden DGP latents."""
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 1]))
    ages = np.clip(np.rint(rng.normal(38.0, 9.0, n)), 18, 75).astype(int)
    female = rng.random(n) < 0.18
    months = np.clip(np.rint(rng.gamma(2.0, 14.0, n)), 0, 120).astype(int)
    local = rng.random(n) < 0.7
    local_codes = _hometown_codes(city.province)
    all_codes = [c for p in PROVINCES for c in _hometown_codes(p)]
    hometown_pick = rng.integers(0, len(all_codes), n)
    local_pick = rng.integers(0, len(local_codes), n)
    regions = rng.integers(0, len(REGIONS), n)
    rental = rng.random(n) < 0.3
    hours_mean = np.clip(rng.normal(8.0, 1.8, n), 2.0, 13.0)
    pay_jitter = rng.uniform(0.85, 1.15, n)
    latent_effort = rng.standard_normal(n)
    prior_p = min(0.8, 0.15 * city.n_prior_contests)
    has_prior = rng.random(n) < prior_p
    prior_mult = rng.uniform(0.7, 1.3, n)

    drivers = []
    for i in range(n):
        mean_rev = float(city.avg_hourly_pay * hours_mean[i] * pay_jitter[i])
        hometown = local_codes[local_pick[i]] if local[i] else all_codes[hometown_pick[i]]
        drivers.append(
            DriverProfile(
                id=f"{city.id}-d{i:05d}",
                age=int(ages[i]),
                gender="female" if female[i] else "male",
                platform_age_months=int(months[i]),
                hometown=hometown,
                activity_region=REGIONS[int(regions[i])],
                rental_car=bool(rental[i]),
                city_id=city.id,
                prev_contest_revenue=float(mean_rev * prior_mult[i]) if has_prior[i] else None,
                latent_effort_response=float(latent_effort[i]),
                latent_daily_revenue=mean_rev,
            )
        )
    return drivers


def generate_prior_history(
    city: City, drivers: Sequence[DriverProfile], seed: int
) -> tuple[tuple[str, str, str], ...]:
    """Co-team records from the city's prior contests.

    Each prior round teams a random subset of drivers within activity region,
    which makes past co-teaming correlate with region homophily the way real
    repeat teams would.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 2]))
    records: list[tuple[str, str, str]] = []
    n_rounds = min(city.n_prior_contests, 8)
    ids = np.array([d.id for d in drivers])
    regions = np.array([d.activity_region for d in drivers])
    for r in range(n_rounds):
        take = rng.random(len(drivers)) < 0.35
        label = f"{city.id}-prior{r + 1}"
        for region in REGIONS:
            members = ids[take & (regions == region)]
            if len(members) < 2:
                continue
            order = rng.permutation(len(members))
            shuffled = members[order]
            for k in range(0, len(shuffled) - 4, 5):
                chunk = sorted(shuffled[k : k + 5])
                for i in range(len(chunk)):
                    for j in range(i + 1, len(chunk)):
                        records.append((chunk[i], chunk[j], label))
    return tuple(records)


@dataclass(frozen=True)
class CityPool:
    city: City
    drivers: tuple[DriverProfile, ...]
    history: tuple[tuple[str, str, str], ...]


def generate_city_pool(config: CityConfig, n_drivers: int, seed: int, city_id: str = "city1") -> CityPool:
    city = generate_city(config, seed, city_id)
    drivers = generate_drivers(city, n_drivers, seed)
    history = generate_prior_history(city, drivers, seed)
    return CityPool(city=city, drivers=tuple(drivers), history=history)


# ---------------------------------------------------------------------------
# Team assignment
# ---------------------------------------------------------------------------


def pair_count_map(history: Iterable[tuple[str, str, str]]) -> dict[tuple[str, str], int]:
    counts: dict[tuple[str, str], int] = {}
    for a, b, _contest in history:
        key = (a, b) if a <= b else (b, a)
        counts[key] = counts.get(key, 0) + 1
    return counts


def assign_system_teams(
    unteamed_ids: Sequence[str],
    team_size: int,
    holdout_frac: float,
    seed,
    contest_id: str = "contest",
    team_index_start: int = 0,
) -> tuple[list[Team], list[str], list[str]]:
    """Randomly hold out solo controls, then chunk the rest into full teams.

    Returns (teams, solo_ids, overflow_ids). ``solo_ids`` is the uniformly
    random ``round(holdout_frac * n)`` holdout that serves as the control
    group; overflow drivers (too few to fill a final team) are kept separate
    so they never contaminate the control average.
    """
    if team_size < 3:
        raise ValueError("team_size must be at least 3")
    if not 0 < holdout_frac < 1:
        raise ValueError("holdout_frac must be strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    ids = list(unteamed_ids)
    n = len(ids)
    n_solo = int(math.floor(holdout_frac * n + 0.5))
    order = rng.permutation(n)
    shuffled = [ids[i] for i in order]
    solo_ids = sorted(shuffled[:n_solo])
    rest = shuffled[n_solo:]
    teams: list[Team] = []
    k = 0
    while k + team_size <= len(rest):
        chunk = rest[k : k + team_size]
        teams.append(
            Team(
                id=f"{contest_id}-t{team_index_start + len(teams):03d}",
                contest_id=contest_id,
                captain_id=chunk[0],
                member_ids=tuple(chunk[1:]),
                formation="system_formed",
            )
        )
        k += team_size
    overflow_ids = sorted(rest[k:])
    return teams, solo_ids, overflow_ids


def _form_self_teams(
    pool: Sequence[DriverProfile],
    pair_counts: Mapping[tuple[str, str], int],
    team_size: int,
    self_form_frac: float,
    rng: np.random.Generator,
    contest_id: str,
) -> tuple[list[Team], list[str]]:
    """Homophily-weighted self-formation for a fraction of sign-ups.

    Members join a forming team with weight increasing in shared hometown,
    shared activity region, and past co-teaming with current members.
    """
    ids = [d.id for d in pool]
    n = len(pool)
    n_teams = int(self_form_frac * n / team_size)
    if n_teams == 0:
        return [], list(ids)

    hometowns = np.array([d.hometown for d in pool])
    regions = np.array([d.activity_region for d in pool])
    neighbors: dict[str, set[str]] = {d.id: set() for d in pool}
    for (a, b), _cnt in pair_counts.items():
        if a in neighbors and b in neighbors:
            neighbors[a].add(b)
            neighbors[b].add(a)

    available = np.ones(n, dtype=bool)
    teams: list[Team] = []
    for t in range(n_teams):
        remaining = int(available.sum())
        if remaining < team_size:
            break
        cand = np.flatnonzero(available)
        captain_pos = int(cand[rng.integers(0, len(cand))])
        available[captain_pos] = False
        member_pos = [captain_pos]
        for _ in range(team_size - 1):
            cand = np.flatnonzero(available)
            w = np.ones(len(cand))
            for m in member_pos:
                w += 2.0 * (hometowns[cand] == hometowns[m])
                w += 2.0 * (regions[cand] == regions[m])
                m_neighbors = neighbors[ids[m]]
                if m_neighbors:
                    w += np.fromiter(
                        (1.0 if ids[c] in m_neighbors else 0.0 for c in cand),
                        dtype=np.float64,
                        count=len(cand),
                    )
            pick = int(cand[rng.choice(len(cand), p=w / w.sum())])
            available[pick] = False
            member_pos.append(pick)
        teams.append(
            Team(
                id=f"{contest_id}-t{t:03d}",
                contest_id=contest_id,
                captain_id=ids[member_pos[0]],
                member_ids=tuple(ids[p] for p in member_pos[1:]),
                formation="self_formed",
            )
        )
    unteamed = [ids[i] for i in np.flatnonzero(available)]
    return teams, unteamed


def partition_contest_groups(
    teams: Sequence[Team],
    panels: Mapping[str, RevenuePanel],
    group_size: int,
    pre_window: Period,
) -> list[ContestGroup]:
    """Sort teams by summed member pre-contest mean daily revenue, then chunk."""
    scores = {}
    for team in teams:
        scores[team.id] = sum(
            did.avg_daily_revenue(panels[m], pre_window) for m in team.all_member_ids()
        )
    return _partition_by_score(teams, scores, group_size)


def _partition_by_score(
    teams: Sequence[Team], scores: Mapping[str, float], group_size: int
) -> list[ContestGroup]:
    if not teams:
        raise ValueError("cannot partition an empty team list")
    if group_size < 2:
        raise ValueError("group_size must be at least 2")
    ranked = sorted(teams, key=lambda t: (scores[t.id], t.id))
    groups: list[ContestGroup] = []
    for k in range(0, len(ranked), group_size):
        chunk = ranked[k : k + group_size]
        vals = tuple(scores[t.id] for t in chunk)
        lo = min(vals)
        ratio = math.inf if lo <= 0 else max(vals) / lo
        groups.append(
            ContestGroup(
                index=len(groups),
                team_ids=tuple(t.id for t in chunk),
                productivity=vals,
                ratio=ratio,
                short=len(chunk) < group_size,
            )
        )
    return groups


# ---------------------------------------------------------------------------
# Contest generation
# ---------------------------------------------------------------------------


def _window_dates(window: Period) -> np.ndarray:
    start = np.datetime64(window.start, "D")
    return start + np.arange(window.n_days)


def _counterfactual_revenue(
    city: City,
    pool: Sequence[DriverProfile],
    window: Period,
    cfg: PanelConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """(n_drivers, n_days) matrix of revenue with no contest running."""
    n, n_days = len(pool), window.n_days
    weekday = np.array([(window.start + dt.timedelta(days=i)).weekday() for i in range(n_days)])
    conds = city.weather.slice(window)
    day_mult = np.array(
        [cfg.dow_multipliers[w] * cfg.weather_multiplier(c) for w, c in zip(weekday, conds)]
    )
    base = np.array([d.latent_daily_revenue for d in pool])
    sigma = cfg.noise_sigma
    if sigma > 0:
        noise = rng.lognormal(mean=-0.5 * sigma * sigma, sigma=sigma, size=(n, n_days))
    else:
        noise = np.ones((n, n_days))
    online = rng.random((n, n_days)) >= cfg.offline_prob
    return base[:, None] * day_mult[None, :] * noise * online


def _period_cols(window: Period, period: Period) -> slice:
    i0 = (period.start - window.start).days
    return slice(i0, i0 + period.n_days)


def _pre_stats(rev_row: np.ndarray, cols: slice, n_days: int) -> tuple[float, float]:
    vals = rev_row[cols]
    mean = float(vals.sum()) / n_days
    sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return mean, sd


def effect_feature_values(
    design: ContestDesign,
    city: City,
    driver: DriverProfile,
    team: Team,
    members: Sequence[DriverProfile],
    pair_counts: Mapping[tuple[str, str], int],
    base_means: Mapping[str, float],
    driver_stats: Mapping[str, float],
    group_gap: float,
) -> dict[str, float]:
    """Values of every EFFECT_FEATURES name for one treated driver.

    ``base_means`` maps member id to baseline-period mean daily revenue;
    ``driver_stats`` carries the focal driver's 30-day pre-signup statistics.
    """
    t1 = design.contest_period()
    fracs = city.weather.fractions(t1)
    member_means = np.array([base_means[m.id] for m in members])
    teammate_hometowns = [m.hometown for m in members if m.id != driver.id]
    own_mean = base_means[driver.id]
    return {
        "team_size": float(design.team_size),
        "group_size": float(design.group_size),
        "contest_days": float(design.contest_days),
        "prize_rank_1": float(design.prize_schedule[0]),
        "captain_bonus": float(design.captain_bonus),
        "rewards_5th_team": float(design.prize_schedule[4] > 0),
        "exclude_worst_member": float(design.exclude_worst_member),
        "snowstorm_frac": fracs["snowstorm"],
        "rain_frac": fracs["rain"],
        "rev_base_mean": own_mean,
        "rev_30d_mean": driver_stats["rev_30d_mean"],
        "rev_30d_sd": driver_stats["rev_30d_sd"],
        "rides_30d_mean": driver_stats["rides_30d_mean"],
        "hours_30d_mean": driver_stats["hours_30d_mean"],
        "age": float(driver.age),
        "gender_female": float(driver.gender == "female"),
        "platform_age_months": float(driver.platform_age_months),
        "rental_car": float(driver.rental_car),
        "prev_contest_rev": float(driver.prev_contest_revenue or 0.0),
        "no_prior_contest": float(driver.prev_contest_revenue is None),
        "is_captain": float(team.captain_id == driver.id),
        "formation_system": float(team.formation == "system_formed"),
        "age_diversity": teamstats.age_diversity([m.age for m in members]),
        "hometown_diversity": teamstats.hometown_diversity([m.hometown for m in members]),
        "hometown_homophily": teamstats.hometown_homophily(driver.hometown, teammate_hometowns),
        "region_homophily": teamstats.region_homophily([m.activity_region for m in members]),
        "team_history": teamstats.team_history([m.id for m in members], pair_counts),
        "team_prod_mean": float(member_means.mean()),
        "diff_from_team_avg": own_mean - float(member_means.mean()),
        "diff_from_team_max": own_mean - float(member_means.max()),
        "gap_to_group_top": group_gap,
        "population_tier": float(city.population_tier),
        "supply_demand_ratio": city.supply_demand_ratio,
        "avg_hourly_pay": city.avg_hourly_pay,
        "n_prior_contests": float(city.n_prior_contests),
    }


def generate_contest(
    city: City,
    design: ContestDesign,
    driver_pool: Sequence[DriverProfile],
    dgp: DGPConfig,
    seed: int,
    history: Iterable[tuple[str, str, str]] = (),
    contest_id: str | None = None,
) -> tuple[ContestDataset, GroundTruth]:
    """Generate one contest: teams, groups, controls, panels, and ground truth.

    Treated drivers' contest-day revenue is the counterfactual draw plus their
    effect (floored at zero); the sidecar records the realized per-driver
    effect, so mean(ITE) equals the stored ATET exactly.
    """
    dgp.validate()
    if contest_id is None:
        contest_id = f"{city.id}-c{seed & 0xFFFFFFFF:08x}"
    pool = list(driver_pool)
    n = len(pool)
    if n < design.team_size + 1:
        raise GenerationError(
            f"pool of {n} cannot fill one team of {design.team_size} plus one solo driver"
        )
    for d in pool:
        if d.city_id != city.id:
            raise GenerationError(f"driver {d.id} is not from city {city.id}")

    window = Period(
        design.start_date - dt.timedelta(days=dgp.panel.back_days),
        design.start_date + dt.timedelta(days=design.contest_days),
    )
    if not city.weather.covers(window):
        raise GenerationError(f"city weather does not cover panel window {window}")

    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 3]))
    # Draw order is fixed: revenue noise, online mask, fares, pay rates, then
    # team formation; changing it would silently change every dataset.
    rev0 = _counterfactual_revenue(city, pool, window, dgp.panel, rng)
    fares = rng.uniform(*dgp.panel.fare_range, size=n)
    pay_rate = np.maximum(city.avg_hourly_pay * rng.uniform(0.85, 1.15, size=n), 1e-9)

    history = tuple(history)
    pool_ids = {d.id for d in pool}
    local_history = tuple(r for r in history if r[0] in pool_ids and r[1] in pool_ids)
    pair_counts = pair_count_map(local_history)

    self_teams, unteamed = _form_self_teams(
        pool, pair_counts, design.team_size, dgp.self_form_frac, rng, contest_id
    )
    sys_teams, solo_ids, overflow_ids = assign_system_teams(
        unteamed,
        design.team_size,
        dgp.holdout_frac,
        rng,
        contest_id=contest_id,
        team_index_start=len(self_teams),
    )
    teams = self_teams + sys_teams
    if not teams:
        raise GenerationError("no teams could be formed from the sign-up pool")

    t1 = design.contest_period()
    t0 = did.baseline_period(t1, design.signup_start())
    if t0.start < window.start:
        raise GenerationError(
            f"baseline period {t0} falls before the panel window; raise panel back_days"
        )
    t0_cols = _period_cols(window, t0)
    t1_cols = _period_cols(window, t1)
    last30 = Period(design.signup_start() - dt.timedelta(days=30), design.signup_start() - dt.timedelta(days=1))
    l30_cols = _period_cols(window, last30)

    index_of = {d.id: i for i, d in enumerate(pool)}
    profile_of = {d.id: d for d in pool}
    base_means = {d.id: float(rev0[i, t0_cols].sum()) / t0.n_days for i, d in enumerate(pool)}

    team_scores = {
        t.id: sum(base_means[m] for m in t.all_member_ids()) for t in teams
    }
    groups = _partition_by_score(teams, team_scores, design.group_size)
    group_top = {}
    for g in groups:
        top = max(g.productivity)
        for tid in g.team_ids:
            group_top[tid] = top

    rides0 = np.floor(rev0 / fares[:, None])
    hours0 = rev0 / pay_rate[:, None]

    rev1 = rev0.copy()
    ites: dict[str, float] = {}
    for team in teams:
        members = [profile_of[m] for m in team.all_member_ids()]
        gap = team_scores[team.id] - group_top[team.id]
        for driver in members:
            i = index_of[driver.id]
            row30 = rev0[i, l30_cols]
            stats = {
                "rev_30d_mean": float(row30.sum()) / 30,
                "rev_30d_sd": float(row30.std(ddof=1)) if row30.size > 1 else 0.0,
                "rides_30d_mean": float(rides0[i, l30_cols].sum()) / 30,
                "hours_30d_mean": float(hours0[i, l30_cols].sum()) / 30,
            }
            values = effect_feature_values(
                design, city, driver, team, members, pair_counts, base_means, stats, gap
            )
            tau = dgp.effect.evaluate(values, driver.latent_effort_response)
            treated_days = np.maximum(rev0[i, t1_cols] + tau, 0.0)
            rev1[i, t1_cols] = treated_days
            ites[driver.id] = float((treated_days - rev0[i, t1_cols]).mean())

    rides1 = np.floor(rev1 / fares[:, None])
    hours1 = rev1 / pay_rate[:, None]
    dates = _window_dates(window)
    panels = {
        d.id: RevenuePanel(d.id, dates, rev1[i], rides1[i], hours1[i]) for i, d in enumerate(pool)
    }

    dataset = ContestDataset(
        contest_id=contest_id,
        design=design,
        city=city,
        drivers={d.id: d for d in pool},
        teams=teams,
        contest_groups=groups,
        solo_ids=solo_ids,
        overflow_ids=overflow_ids,
        panels=panels,
        coteam_history=local_history,
    )
    truth = GroundTruth(
        contest_id=contest_id,
        ites=ites,
        atet=float(np.mean([ites[k] for k in sorted(ites)])),
        dgp_seed=seed,
        effect=dgp.effect,
    )
    return dataset, truth


# ---------------------------------------------------------------------------
# Dataset serialization
# ---------------------------------------------------------------------------

DRIVERS_HEADER = [
    "driver_id",
    "age",
    "gender",
    "platform_age_months",
    "hometown",
    "activity_region",
    "rental_car",
    "city_id",
    "prev_contest_revenue",
]
TEAMS_HEADER = ["team_id", "contest_id", "captain_id", "member_ids", "formation"]
GROUPS_HEADER = ["group_index", "team_ids", "productivity", "ratio", "short"]
PANELS_HEADER = ["driver_id", "date", "revenue", "rides", "hours"]
SOLO_HEADER = ["driver_id", "role"]
WEATHER_HEADER = ["date", "condition"]
COTEAM_HEADER = ["driver_a", "driver_b", "contest_id"]
TRUTH_HEADER = ["driver_id", "true_ite", "latent_effort_response"]


def effect_kv_items(effect: EffectConfig, prefix: str = "effect") -> dict[str, object]:
    items: dict[str, object] = {f"{prefix}.base": effect.base, f"{prefix}.noise_sd": effect.noise_sd}
    for name, coef in effect.linear:
        items[f"{prefix}.linear.{name}"] = coef
    for a, b, coef in effect.interactions:
        items[f"{prefix}.interaction.{a}*{b}"] = coef
    return items


def effect_from_kv(raw: Mapping[str, str], prefix: str = "effect") -> EffectConfig:
    linear = []
    interactions = []
    base = float(raw.get(f"{prefix}.base", "0"))
    noise_sd = float(raw.get(f"{prefix}.noise_sd", "0"))
    for key, value in raw.items():
        if key.startswith(f"{prefix}.linear."):
            linear.append((key[len(f"{prefix}.linear.") :], float(value)))
        elif key.startswith(f"{prefix}.interaction."):
            pair = key[len(f"{prefix}.interaction.") :]
            a, _, b = pair.partition("*")
            interactions.append((a, b, float(value)))
    cfg = EffectConfig(
        base=base, linear=tuple(linear), interactions=tuple(interactions), noise_sd=noise_sd
    )
    cfg.validate()
    return cfg


def write_contest_dir(
    dataset: ContestDataset, truth: GroundTruth | None, path: Path | str
) -> Path:
    """Write one contest directory: analyst tables, manifest, and sidecar.

    Driver latents appear only in the ground-truth sidecar.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    design = dataset.design
    city = dataset.city

    dataio.write_table(
        path / "drivers.tsv",
        DRIVERS_HEADER,
        [
            (
                d.id,
                d.age,
                d.gender,
                d.platform_age_months,
                d.hometown,
                d.activity_region,
                d.rental_car,
                d.city_id,
                "" if d.prev_contest_revenue is None else d.prev_contest_revenue,
            )
            for d in dataset.drivers.values()
        ],
    )
    dataio.write_table(
        path / "teams.tsv",
        TEAMS_HEADER,
        [
            (t.id, t.contest_id, t.captain_id, ";".join(t.member_ids), t.formation)
            for t in dataset.teams
        ],
    )
    dataio.write_table(
        path / "groups.tsv",
        GROUPS_HEADER,
        [
            (
                g.index,
                ";".join(g.team_ids),
                ";".join(repr(v) for v in g.productivity),
                "inf" if math.isinf(g.ratio) else g.ratio,
                g.short,
            )
            for g in dataset.contest_groups
        ],
    )
    panel_rows = []
    for driver_id in dataset.drivers:
        p = dataset.panels[driver_id]
        for k in range(len(p)):
            panel_rows.append(
                (
                    driver_id,
                    p.dates[k].astype(dt.date),
                    float(p.revenue[k]),
                    float(p.rides[k]),
                    float(p.hours[k]),
                )
            )
    dataio.write_table(path / "panels.tsv", PANELS_HEADER, panel_rows)
    dataio.write_table(
        path / "solo.tsv",
        SOLO_HEADER,
        [(d, "control") for d in dataset.solo_ids]
        + [(d, "overflow") for d in dataset.overflow_ids],
    )
    sample_panel = next(iter(dataset.panels.values()))
    window = Period(sample_panel.first_date, sample_panel.last_date)
    dataio.write_table(
        path / "weather.tsv",
        WEATHER_HEADER,
        [(day, city.weather.condition_on(day)) for day in window.dates()],
    )
    dataio.write_table(path / "coteam.tsv", COTEAM_HEADER, list(dataset.coteam_history))

    manifest: dict[str, object] = {
        "contest_id": dataset.contest_id,
        "design.team_size": design.team_size,
        "design.group_size": design.group_size,
        "design.contest_days": design.contest_days,
        "design.start_date": design.start_date,
        "design.signup_days": design.signup_days,
        "design.prize_schedule": list(design.prize_schedule),
        "design.captain_bonus": design.captain_bonus,
        "design.captain_bonus_amount": design.captain_bonus_amount,
        "design.exclude_worst_member": design.exclude_worst_member,
        "design.performance_metric": design.performance_metric,
        "city.id": city.id,
        "city.province": city.province,
        "city.population_tier": city.population_tier,
        "city.supply_demand_ratio": city.supply_demand_ratio,
        "city.avg_hourly_pay": city.avg_hourly_pay,
        "city.n_prior_contests": city.n_prior_contests,
        "counts.drivers": len(dataset.drivers),
        "counts.teams": len(dataset.teams),
        "counts.self_formed": sum(1 for t in dataset.teams if t.formation == "self_formed"),
        "counts.system_formed": sum(1 for t in dataset.teams if t.formation == "system_formed"),
        "counts.solo": len(dataset.solo_ids),
        "counts.overflow": len(dataset.overflow_ids),
        "counts.groups": len(dataset.contest_groups),
    }
    if truth is not None:
        manifest["dgp_seed"] = truth.dgp_seed
    dataio.write_kv(path / "manifest.kv", manifest)

    if truth is not None:
        dataio.write_table(
            path / "ground_truth.tsv",
            TRUTH_HEADER,
            [
                (
                    driver_id,
                    truth.ites[driver_id],
                    dataset.drivers[driver_id].latent_effort_response,
                )
                for driver_id in sorted(truth.ites)
            ],
        )
        truth_kv: dict[str, object] = {
            "contest_id": truth.contest_id,
            "atet": truth.atet,
            "dgp_seed": truth.dgp_seed,
            "n_treated": len(truth.ites),
        }
        truth_kv.update(effect_kv_items(truth.effect))
        dataio.write_kv(path / "ground_truth.kv", truth_kv)
    return path


def design_from_manifest(raw: Mapping[str, str]) -> ContestDesign:
    prizes = tuple(float(v) for v in raw["design.prize_schedule"].split(","))
    return ContestDesign(
        team_size=int(raw["design.team_size"]),
        group_size=int(raw["design.group_size"]),
        contest_days=int(raw["design.contest_days"]),
        start_date=dt.date.fromisoformat(raw["design.start_date"]),
        signup_days=int(raw["design.signup_days"]),
        prize_schedule=prizes,  # type: ignore[arg-type]
        captain_bonus=dataio.parse_bool(raw["design.captain_bonus"]),
        captain_bonus_amount=float(raw["design.captain_bonus_amount"]),
        exclude_worst_member=dataio.parse_bool(raw["design.exclude_worst_member"]),
        performance_metric=raw["design.performance_metric"],
    )


def read_manifest(path: Path | str) -> dict[str, str]:
    return dataio.read_kv(Path(path) / "manifest.kv")


def read_contest_dir(path: Path | str) -> tuple[ContestDataset, GroundTruth | None]:
    """Reconstruct a contest dataset (and sidecar, if present) from disk."""
    path = Path(path)
    raw = read_manifest(path)
    design = design_from_manifest(raw)

    _, weather_rows = dataio.read_table(path / "weather.tsv")
    w_start = dt.date.fromisoformat(weather_rows[0][0])
    conditions = tuple(r[1] for r in weather_rows)
    city = City(
        id=raw["city.id"],
        province=raw["city.province"],
        population_tier=int(raw["city.population_tier"]),
        supply_demand_ratio=float(raw["city.supply_demand_ratio"]),
        avg_hourly_pay=float(raw["city.avg_hourly_pay"]),
        n_prior_contests=int(raw["city.n_prior_contests"]),
        weather=WeatherSeries(start=w_start, conditions=conditions),
    )

    _, driver_rows = dataio.read_table(path / "drivers.tsv")
    drivers: dict[str, DriverProfile] = {}
    for row in driver_rows:
        vals = dict(zip(DRIVERS_HEADER, row))
        drivers[vals["driver_id"]] = DriverProfile(
            id=vals["driver_id"],
            age=int(vals["age"]),
            gender=vals["gender"],
            platform_age_months=int(vals["platform_age_months"]),
            hometown=vals["hometown"],
            activity_region=vals["activity_region"],
            rental_car=dataio.parse_bool(vals["rental_car"]),
            city_id=vals["city_id"],
            prev_contest_revenue=(
                None if vals["prev_contest_revenue"] == "" else float(vals["prev_contest_revenue"])
            ),
        )

    contest_id = raw["contest_id"]
    _, team_rows = dataio.read_table(path / "teams.tsv")
    teams = [
        Team(
            id=r[0],
            contest_id=r[1],
            captain_id=r[2],
            member_ids=tuple(m for m in r[3].split(";") if m),
            formation=r[4],
        )
        for r in team_rows
    ]
    _, group_rows = dataio.read_table(path / "groups.tsv")
    groups = [
        ContestGroup(
            index=int(r[0]),
            team_ids=tuple(r[1].split(";")),
            productivity=tuple(float(v) for v in r[2].split(";")),
            ratio=float(r[3]),
            short=dataio.parse_bool(r[4]),
        )
        for r in group_rows
    ]
    _, solo_rows = dataio.read_table(path / "solo.tsv")
    solo_ids = [r[0] for r in solo_rows if r[1] == "control"]
    overflow_ids = [r[0] for r in solo_rows if r[1] == "overflow"]

    _, panel_rows = dataio.read_table(path / "panels.tsv")
    by_driver: dict[str, list[list[str]]] = {}
    for r in panel_rows:
        by_driver.setdefault(r[0], []).append(r)
    panels = {}
    for driver_id, rows in by_driver.items():
        panels[driver_id] = RevenuePanel(
            driver_id,
            [np.datetime64(r[1], "D") for r in rows],
            [float(r[2]) for r in rows],
            [float(r[3]) for r in rows],
            [float(r[4]) for r in rows],
        )

    _, coteam_rows = dataio.read_table(path / "coteam.tsv")
    dataset = ContestDataset(
        contest_id=contest_id,
        design=design,
        city=city,
        drivers=drivers,
        teams=teams,
        contest_groups=groups,
        solo_ids=solo_ids,
        overflow_ids=overflow_ids,
        panels=panels,
        coteam_history=tuple((r[0], r[1], r[2]) for r in coteam_rows),
    )

    truth = None
    truth_kv_path = path / "ground_truth.kv"
    if truth_kv_path.exists():
        truth_raw = dataio.read_kv(truth_kv_path)
        _, truth_rows = dataio.read_table(path / "ground_truth.tsv")
        ites = {r[0]: float(r[1]) for r in truth_rows}
        truth = GroundTruth(
            contest_id=truth_raw["contest_id"],
            ites=ites,
            atet=float(truth_raw["atet"]),
            dgp_seed=int(truth_raw["dgp_seed"]),
            effect=effect_from_kv(truth_raw),
        )
    return dataset, truth
