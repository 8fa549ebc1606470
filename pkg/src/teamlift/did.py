"""Two-period difference-in-differences estimation of per-driver effects.

For each treated driver the within-driver change in average daily revenue
between a day-of-week-matched baseline period and the contest period is
compared against the mean change among the contest's held-out solo drivers,
yielding an individual treatment effect per driver and the contest-level
average effect on the treated.
"""
from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np

from . import dataio
from .panels import Period, RevenuePanel

if TYPE_CHECKING:  # pragma: no cover
    from .synthgen import ContestDataset

log = logging.getLogger(__name__)

__all__ = [
    "ControlTrend",
    "ITERecord",
    "baseline_period",
    "avg_daily_revenue",
    "driver_delta",
    "control_trend",
    "estimate_ite",
    "estimate_atet",
    "atet_with_se",
    "write_ite_table",
    "read_ite_table",
]


@dataclass(frozen=True)
class ControlTrend:
    """Mean pre/post revenue change across a contest's solo (control) drivers."""

    contest_id: str
    value: float
    n_control: int
    sd: float = 0.0

    def __post_init__(self) -> None:
        if self.n_control < 1:
            raise ValueError("control trend requires at least one control driver")


@dataclass(frozen=True)
class ITERecord:
    """Estimated individual treatment effect for one treated driver."""

    contest_id: str
    driver_id: str
    team_id: str
    delta_r: float
    ite: float
    baseline_period: Period
    contest_period: Period


def baseline_period(contest_period: Period, signup_start: dt.date) -> Period:
    """Most recent weekday-matched period of equal length ending before signup.

    Shifting by whole weeks preserves the day-of-week sequence, so the result
    is the contest period moved back the smallest number of weeks that puts
    its last day strictly before ``signup_start``.
    """
    if signup_start >= contest_period.start:
        raise ValueError("signup must start before the contest period")
    days_past = (contest_period.end - signup_start).days + 1
    weeks_back = max(1, math.ceil(days_past / 7))
    return contest_period.shifted(-7 * weeks_back)


def avg_daily_revenue(panel: RevenuePanel, period: Period, field: str = "revenue") -> float:
    """Mean daily value over the period, counting absent days as zero."""
    if period.n_days <= 0:
        raise ValueError("period has no days")
    return float(panel.values_in(period, field).sum()) / period.n_days


def driver_delta(panel: RevenuePanel, t0: Period, t1: Period) -> float:
    """Within-driver change in average daily revenue from t0 to t1."""
    return avg_daily_revenue(panel, t1) - avg_daily_revenue(panel, t0)


def control_trend(
    contest_id: str,
    control_panels: Iterable[RevenuePanel],
    t0: Period,
    t1: Period,
) -> ControlTrend:
    """Aggregate revenue change over the control group (its mean and spread)."""
    deltas = np.array([driver_delta(p, t0, t1) for p in control_panels], dtype=np.float64)
    if deltas.size == 0:
        raise ValueError(f"contest {contest_id}: empty control group, cannot estimate")
    sd = float(deltas.std(ddof=1)) if deltas.size > 1 else 0.0
    return ControlTrend(contest_id=contest_id, value=float(deltas.mean()), n_control=int(deltas.size), sd=sd)


def estimate_ite(dataset: "ContestDataset") -> list[ITERecord]:
    """One ITE record per treated driver: own delta minus the control trend.

    Treated drivers with no panel are skipped and logged rather than failing
    the whole contest.
    """
    t1 = dataset.contest_period()
    t0 = baseline_period(t1, dataset.signup_start())
    controls = [dataset.panels[d] for d in dataset.solo_ids if d in dataset.panels]
    trend = control_trend(dataset.contest_id, controls, t0, t1)

    records: list[ITERecord] = []
    for team in dataset.teams:
        for driver_id in team.all_member_ids():
            panel = dataset.panels.get(driver_id)
            if panel is None:
                log.warning(
                    "contest %s: treated driver %s has no panel, skipped",
                    dataset.contest_id,
                    driver_id,
                )
                continue
            delta = driver_delta(panel, t0, t1)
            records.append(
                ITERecord(
                    contest_id=dataset.contest_id,
                    driver_id=driver_id,
                    team_id=team.id,
                    delta_r=delta,
                    ite=delta - trend.value,
                    baseline_period=t0,
                    contest_period=t1,
                )
            )
    return records


def estimate_atet(records: Iterable[ITERecord]) -> float:
    """Arithmetic mean of the individual effects."""
    ites = np.array([r.ite for r in records], dtype=np.float64)
    if ites.size == 0:
        raise ValueError("no ITE records to average")
    return float(ites.mean())


def atet_with_se(records: Iterable[ITERecord], trend: ControlTrend) -> tuple[float, float]:
    """ATET point estimate with the plain standard error of a mean difference.

    The estimate is mean(treated deltas) - mean(control deltas); both means
    carry sampling noise, so SE^2 = sd_t^2/n_t + sd_c^2/n_c.
    """
    ites = np.array([r.ite for r in records], dtype=np.float64)
    if ites.size == 0:
        raise ValueError("no ITE records to average")
    sd_t = float(ites.std(ddof=1)) if ites.size > 1 else 0.0
    var = sd_t**2 / ites.size + trend.sd**2 / trend.n_control
    return float(ites.mean()), float(math.sqrt(var))


ITE_HEADER = [
    "contest_id",
    "driver_id",
    "team_id",
    "delta_r",
    "ite",
    "t0_start",
    "t0_end",
    "t1_start",
    "t1_end",
]


def write_ite_table(path: Path | str, records: Iterable[ITERecord]) -> Path:
    rows = [
        (
            r.contest_id,
            r.driver_id,
            r.team_id,
            r.delta_r,
            r.ite,
            r.baseline_period.start,
            r.baseline_period.end,
            r.contest_period.start,
            r.contest_period.end,
        )
        for r in records
    ]
    return dataio.write_table(path, ITE_HEADER, rows)


def read_ite_table(path: Path | str) -> list[ITERecord]:
    header, rows = dataio.read_table(path)
    if header != ITE_HEADER:
        raise ValueError(f"unexpected ite table header: {header}")
    records = []
    for row in rows:
        vals: Mapping[str, str] = dict(zip(header, row))
        records.append(
            ITERecord(
                contest_id=vals["contest_id"],
                driver_id=vals["driver_id"],
                team_id=vals["team_id"],
                delta_r=float(vals["delta_r"]),
                ite=float(vals["ite"]),
                baseline_period=Period(
                    dt.date.fromisoformat(vals["t0_start"]), dt.date.fromisoformat(vals["t0_end"])
                ),
                contest_period=Period(
                    dt.date.fromisoformat(vals["t1_start"]), dt.date.fromisoformat(vals["t1_end"])
                ),
            )
        )
    return records
