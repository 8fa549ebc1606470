"""Calendar periods and per-driver daily activity panels."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

__all__ = ["Period", "RevenuePanel"]


@dataclass(frozen=True)
class Period:
    """Inclusive range of calendar dates."""

    start: dt.date
    end: dt.date

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"period start {self.start} is after end {self.end}")

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(self.n_days)]

    def weekday_sequence(self) -> tuple[int, ...]:
        return tuple(d.weekday() for d in self.dates())

    def contains(self, day: dt.date) -> bool:
        return self.start <= day <= self.end

    def shifted(self, days: int) -> "Period":
        off = dt.timedelta(days=days)
        return Period(self.start + off, self.end + off)


class RevenuePanel:
    """Daily (revenue, rides, hours) series for one driver.

    Dates must be strictly increasing with no duplicates; values must be
    non-negative. Days absent from the panel count as zero activity.
    """

    __slots__ = ("driver_id", "dates", "revenue", "rides", "hours")

    def __init__(self, driver_id, dates, revenue, rides, hours):
        self.driver_id = str(driver_id)
        self.dates = np.asarray(dates, dtype="datetime64[D]")
        self.revenue = np.asarray(revenue, dtype=np.float64)
        self.rides = np.asarray(rides, dtype=np.float64)
        self.hours = np.asarray(hours, dtype=np.float64)
        n = self.dates.shape[0]
        if not (self.revenue.shape[0] == self.rides.shape[0] == self.hours.shape[0] == n):
            raise ValueError("panel columns have mismatched lengths")
        if n > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise ValueError("panel dates must be strictly increasing")
        for name in ("revenue", "rides", "hours"):
            if np.any(getattr(self, name) < 0):
                raise ValueError(f"panel {name} contains negative values")

    def __len__(self) -> int:
        return int(self.dates.shape[0])

    @property
    def first_date(self) -> dt.date | None:
        return None if len(self) == 0 else self.dates[0].astype(dt.date)

    @property
    def last_date(self) -> dt.date | None:
        return None if len(self) == 0 else self.dates[-1].astype(dt.date)

    def period_mask(self, period: Period) -> np.ndarray:
        lo = np.datetime64(period.start, "D")
        hi = np.datetime64(period.end, "D")
        return (self.dates >= lo) & (self.dates <= hi)

    def values_in(self, period: Period, field: str = "revenue") -> np.ndarray:
        """Recorded values of ``field`` that fall inside ``period``.

        Absent days contribute nothing here; callers dividing by the period
        length implement the zero-fill convention.
        """
        return getattr(self, field)[self.period_mask(period)]

    def daily_values(self, period: Period, field: str = "revenue") -> np.ndarray:
        """Zero-filled daily vector of ``field`` over ``period``.

        One entry per calendar day; days absent from the panel are zero. Means
        and sds over this vector therefore follow the zero-fill convention.
        """
        out = np.zeros(period.n_days)
        mask = self.period_mask(period)
        idx = (self.dates[mask] - np.datetime64(period.start, "D")).astype(int)
        out[idx] = getattr(self, field)[mask]
        return out

    def before(self, cutoff: dt.date) -> "RevenuePanel":
        """Sub-panel of rows strictly before ``cutoff``."""
        mask = self.dates < np.datetime64(cutoff, "D")
        return RevenuePanel(
            self.driver_id,
            self.dates[mask],
            self.revenue[mask],
            self.rides[mask],
            self.hours[mask],
        )

    def covers(self, period: Period) -> bool:
        """True if a row exists for every day of ``period``."""
        return int(self.period_mask(period).sum()) == period.n_days
