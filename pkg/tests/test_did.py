"""Difference-in-differences estimator against independent oracles.

The baseline-period oracle scans whole-week back-shifts instead of computing
the shift arithmetically; the delta oracles recompute averages with naive
date loops over dict-of-dates panels.
"""
import datetime as dt

import numpy as np
import pytest

from conftest import make_design, make_panel
from teamlift import did
from teamlift.panels import Period
from teamlift.synthgen import ContestDataset, Team


def scan_baseline(contest: Period, signup_start: dt.date) -> Period:
    """Oracle: the closest whole-week back-shift ending before signup opens."""
    k = 1
    while True:
        cand = contest.shifted(-7 * k)
        if cand.end < signup_start:
            return cand
        k += 1


def naive_avg(day_values: dict[dt.date, float], period: Period) -> float:
    total = sum(day_values.get(d, 0.0) for d in period.dates())
    return total / period.n_days


class TestBaselinePeriod:
    def test_hand_example_friday_contest(self):
        # Fri Aug 10 .. Sun Aug 12, signups open Aug 3: two weeks back
        t1 = Period(dt.date(2018, 8, 10), dt.date(2018, 8, 12))
        t0 = did.baseline_period(t1, dt.date(2018, 8, 3))
        assert t0 == Period(dt.date(2018, 7, 27), dt.date(2018, 7, 29))

    def test_one_week_suffices_when_signup_is_late(self):
        t1 = Period(dt.date(2018, 8, 10), dt.date(2018, 8, 12))
        t0 = did.baseline_period(t1, dt.date(2018, 8, 9))
        assert t0 == Period(dt.date(2018, 8, 3), dt.date(2018, 8, 5))

    def test_matches_scan_oracle_over_many_layouts(self):
        day = dt.date(2018, 3, 5)
        for start_off in range(40):
            for length in (1, 3, 5, 7, 10, 14):
                for signup_days in range(3, 8):
                    t1_start = day + dt.timedelta(days=start_off)
                    t1 = Period(t1_start, t1_start + dt.timedelta(days=length - 1))
                    signup = t1_start - dt.timedelta(days=signup_days)
                    assert did.baseline_period(t1, signup) == scan_baseline(t1, signup)

    def test_weekday_alignment_and_minimality(self):
        t1 = Period(dt.date(2018, 6, 20), dt.date(2018, 6, 26))
        signup = dt.date(2018, 6, 14)
        t0 = did.baseline_period(t1, signup)
        assert t0.weekday_sequence() == t1.weekday_sequence()
        assert t0.end < signup
        # one week later would cross the signup firewall
        assert t0.shifted(7).end >= signup


class TestDeltas:
    def test_avg_daily_revenue_zero_fill_oracle(self):
        panel = make_panel("d1", dt.date(2018, 8, 1), [30.0, 0.0, 60.0])
        day_values = {
            dt.date(2018, 8, 1): 30.0,
            dt.date(2018, 8, 2): 0.0,
            dt.date(2018, 8, 3): 60.0,
        }
        for period in (
            Period(dt.date(2018, 8, 1), dt.date(2018, 8, 3)),
            Period(dt.date(2018, 7, 30), dt.date(2018, 8, 3)),  # absent days are zeros
            Period(dt.date(2018, 8, 2), dt.date(2018, 8, 5)),
        ):
            assert did.avg_daily_revenue(panel, period) == naive_avg(day_values, period)

    def test_driver_delta_hand_value(self):
        # t0 average 20, t1 average 50: delta 30
        revenue = [20.0, 20.0, 20.0, 0.0, 0.0, 0.0, 0.0, 50.0, 50.0, 50.0]
        panel = make_panel("d1", dt.date(2018, 8, 1), revenue)
        t0 = Period(dt.date(2018, 8, 1), dt.date(2018, 8, 3))
        t1 = Period(dt.date(2018, 8, 8), dt.date(2018, 8, 10))
        assert did.driver_delta(panel, t0, t1) == 30.0

    def test_control_trend_mean_and_se_inputs(self):
        t0 = Period(dt.date(2018, 8, 1), dt.date(2018, 8, 2))
        t1 = Period(dt.date(2018, 8, 5), dt.date(2018, 8, 6))
        panels = [
            make_panel("c1", dt.date(2018, 8, 1), [10.0, 10.0, 0.0, 0.0, 16.0, 16.0]),
            make_panel("c2", dt.date(2018, 8, 1), [20.0, 20.0, 0.0, 0.0, 30.0, 30.0]),
        ]
        trend = did.control_trend("k", panels, t0, t1)
        assert trend.value == np.mean([6.0, 10.0])
        assert trend.n_control == 2
        assert trend.sd == np.std([6.0, 10.0], ddof=1)

    def test_control_trend_requires_controls(self):
        t0 = Period(dt.date(2018, 8, 1), dt.date(2018, 8, 2))
        t1 = Period(dt.date(2018, 8, 5), dt.date(2018, 8, 6))
        with pytest.raises(Exception):
            did.control_trend("k", [], t0, t1)


def tiny_dataset() -> ContestDataset:
    """Two treated drivers on one team plus two controls, hand-set panels.

    Contest Fri Aug 10 .. Sun Aug 12 2018, signups from Aug 6, so one
    whole-week back-shift lands on Fri Aug 3 .. Sun Aug 5, which ends
    strictly before signups open.
    """
    design = make_design(
        start_date=dt.date(2018, 8, 10), contest_days=3, signup_days=4, team_size=3
    )
    start = dt.date(2018, 8, 1)

    def series(t0_level, t1_level):
        rev = [0.0] * 12
        for i in range(2, 5):  # Aug 3..5
            rev[i] = t0_level
        for i in range(9, 12):  # Aug 10..12
            rev[i] = t1_level
        return rev

    panels = {
        "t1": make_panel("t1", start, series(100.0, 140.0)),  # delta 40
        "t2": make_panel("t2", start, series(80.0, 90.0)),  # delta 10
        "s1": make_panel("s1", start, series(50.0, 55.0)),  # delta 5
        "s2": make_panel("s2", start, series(60.0, 75.0)),  # delta 15
    }
    team = Team(id="T1", contest_id="k", captain_id="t1", member_ids=("t2",), formation="system_formed")
    return ContestDataset(
        contest_id="k",
        design=design,
        city=None,
        drivers={},
        teams=[team],
        contest_groups=[],
        solo_ids=["s1", "s2"],
        overflow_ids=[],
        panels=panels,
    )


class TestEstimateITE:
    def test_hand_dataset_end_to_end(self):
        ds = tiny_dataset()
        t1 = ds.contest_period()
        t0 = did.baseline_period(t1, ds.signup_start())
        assert t0 == Period(dt.date(2018, 8, 3), dt.date(2018, 8, 5))

        records = did.estimate_ite(ds)
        by_driver = {r.driver_id: r for r in records}
        # control trend = mean(5, 15) = 10; ITEs are deltas minus that
        assert by_driver["t1"].ite == 30.0
        assert by_driver["t2"].ite == 0.0
        assert did.estimate_atet(records) == 15.0

        trend = did.control_trend("k", [ds.panels[i] for i in ds.solo_ids], t0, t1)
        atet, se = did.atet_with_se(records, trend)
        assert atet == 15.0
        # two-sample SE with sample sds of treated deltas and control deltas
        sd_t = np.std([40.0, 10.0], ddof=1)
        sd_c = np.std([5.0, 15.0], ddof=1)
        assert np.isclose(se, np.sqrt(sd_t**2 / 2 + sd_c**2 / 2))

    def test_translation_equivariance_of_treated_uplift(self):
        # raising one treated driver's contest-day revenue by c raises that
        # driver's ITE by exactly c and leaves other drivers unchanged
        ds = tiny_dataset()
        base = {r.driver_id: r.ite for r in did.estimate_ite(ds)}
        bumped = tiny_dataset()
        p = bumped.panels["t1"]
        rev = p.revenue.copy()
        rev[9:12] += 25.0
        bumped.panels["t1"] = make_panel("t1", dt.date(2018, 8, 1), rev)
        after = {r.driver_id: r.ite for r in did.estimate_ite(bumped)}
        assert after["t1"] == base["t1"] + 25.0
        assert after["t2"] == base["t2"]

    def test_records_carry_periods(self):
        ds = tiny_dataset()
        rec = did.estimate_ite(ds)[0]
        assert rec.contest_period == ds.contest_period()
        assert rec.baseline_period == did.baseline_period(ds.contest_period(), ds.signup_start())

    def test_ite_table_round_trip(self, tmp_path):
        ds = tiny_dataset()
        records = did.estimate_ite(ds)
        path = tmp_path / "ite.tsv"
        did.write_ite_table(path, records)
        back = did.read_ite_table(path)
        assert back == records
