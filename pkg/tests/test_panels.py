"""Periods and daily revenue panels."""
import datetime as dt

import numpy as np
import pytest

from conftest import make_panel
from teamlift.panels import Period, RevenuePanel


def test_period_basics():
    p = Period(dt.date(2018, 8, 10), dt.date(2018, 8, 12))
    assert p.n_days == 3
    assert p.dates() == [dt.date(2018, 8, 10), dt.date(2018, 8, 11), dt.date(2018, 8, 12)]
    assert p.contains(dt.date(2018, 8, 11))
    assert not p.contains(dt.date(2018, 8, 13))


def test_period_rejects_reversed():
    with pytest.raises(ValueError):
        Period(dt.date(2018, 8, 12), dt.date(2018, 8, 10))


def test_period_weekday_sequence_and_shift():
    p = Period(dt.date(2018, 8, 10), dt.date(2018, 8, 12))  # Fri..Sun
    assert p.weekday_sequence() == (4, 5, 6)
    back = p.shifted(-14)
    assert back.start == dt.date(2018, 7, 27)
    assert back.weekday_sequence() == p.weekday_sequence()


def test_panel_validation():
    with pytest.raises(ValueError):
        make_panel("d1", dt.date(2018, 1, 1), [-1.0, 2.0])
    dates = np.array(["2018-01-02", "2018-01-01"], dtype="datetime64[D]")
    with pytest.raises(ValueError):
        RevenuePanel("d1", dates, np.ones(2), np.ones(2), np.ones(2))


def test_daily_values_zero_fills_missing_days():
    # panel covers Jan 1..3; ask for Dec 31..Jan 4: gaps are zero activity
    panel = make_panel("d1", dt.date(2018, 1, 1), [10.0, 0.0, 30.0])
    period = Period(dt.date(2017, 12, 31), dt.date(2018, 1, 4))
    np.testing.assert_array_equal(
        panel.daily_values(period), [0.0, 10.0, 0.0, 30.0, 0.0]
    )


def test_daily_values_field_selection():
    panel = make_panel("d1", dt.date(2018, 1, 1), [10.0, 20.0], rides=[1, 2], hours=[0.5, 1.5])
    period = Period(dt.date(2018, 1, 1), dt.date(2018, 1, 2))
    np.testing.assert_array_equal(panel.daily_values(period, "rides"), [1.0, 2.0])
    np.testing.assert_array_equal(panel.daily_values(period, "hours"), [0.5, 1.5])


def test_covers_and_before():
    panel = make_panel("d1", dt.date(2018, 1, 5), [1.0, 2.0, 3.0])
    assert panel.covers(Period(dt.date(2018, 1, 5), dt.date(2018, 1, 7)))
    assert not panel.covers(Period(dt.date(2018, 1, 4), dt.date(2018, 1, 6)))
    trimmed = panel.before(dt.date(2018, 1, 7))
    assert trimmed.dates.shape[0] == 2
    np.testing.assert_array_equal(trimmed.revenue, [1.0, 2.0])
