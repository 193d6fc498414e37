"""Shared domain types: grids, calendars, tariffs, battery arithmetic."""
import numpy as np
import pytest

from peakshaver.core import (
    BatteryParams,
    ExogenousData,
    PeakCalendar,
    ScenarioEnsemble,
    Tariff,
    TimeGrid,
    format_timestamp,
    parse_timestamp,
    storage_delta,
    terminal_price,
)
from peakshaver.errors import DomainError


def test_time_grid_indexing():
    grid = TimeGrid.from_iso("2024-01-01T00:00:00Z", 72)
    assert format_timestamp(grid.timestamp(0)) == "2024-01-01T00:00:00Z"
    assert format_timestamp(grid.timestamp(25)) == "2024-01-02T01:00:00Z"
    assert grid.hour_of_day(25) == 1.0
    assert grid.day_index(25) == 1
    half = TimeGrid.from_iso("2024-01-01T00:00:00Z", 8, step_hours=0.5)
    assert format_timestamp(half.timestamp(3)) == "2024-01-01T01:30:00Z"
    assert half.hour_of_day(3) == 1.5


def test_timestamp_round_trip():
    stamp = parse_timestamp("2024-06-30T23:00:00Z")
    assert format_timestamp(stamp) == "2024-06-30T23:00:00Z"
    # naive stamps are read as UTC
    naive = parse_timestamp("2024-06-30T23:00:00")
    assert naive == stamp
    with pytest.raises(DomainError):
        parse_timestamp("yesterday")


def test_calendar_periods_and_extrapolation():
    cal = PeakCalendar(boundaries=(0, 10, 24), n_steps=30)
    assert cal.n_periods == 3
    assert [cal.period_of(t) for t in (0, 9, 10, 23, 24, 29)] == \
        [1, 1, 2, 2, 3, 3]
    assert cal.period_span(2) == (10, 24)
    assert cal.period_span(3) == (24, 30)
    # past the data the final period length repeats
    assert cal.period_of(30) == 4
    assert cal.period_span(4) == (30, 36)
    assert cal.period_length_hours(1) == 10.0
    with pytest.raises(DomainError):
        PeakCalendar(boundaries=(0, 30), n_steps=30)
    with pytest.raises(DomainError):
        PeakCalendar(boundaries=(5,), n_steps=30)


def test_uniform_calendar():
    cal = PeakCalendar.uniform(48, 24)
    assert cal.boundaries == (0, 24)
    assert cal.period_of(47) == 2
    short = PeakCalendar.uniform(10, 24)
    assert short.n_periods == 1


def test_tariff_day_night_and_windows():
    grid = TimeGrid.from_iso("2024-01-01T00:00:00Z", 24)
    tariff = Tariff.day_night(grid, 0.14, 0.09, 3.0, extra_steps=12)
    assert len(tariff.buy_price) == 36
    assert tariff.buy_price[6] == 0.09
    assert tariff.buy_price[7] == 0.14
    assert tariff.buy_price[19] == 0.14
    assert tariff.buy_price[20] == 0.09
    # wraps into the next day for the extra steps
    assert tariff.buy_price[31] == 0.14
    window = tariff.price_window(20, 10)
    assert len(window) == 10
    with pytest.raises(DomainError):
        tariff.price_window(30, 10)
    with pytest.raises(DomainError):
        Tariff(np.array([0.1, 0.0]), 3.0)
    with pytest.raises(DomainError):
        Tariff(np.array([0.1]), 0.0)


def test_storage_delta_and_terminal_price():
    params = BatteryParams(e_max=20.0, p_c_max=5.0, p_dc_max=4.0,
                           m_c=0.9, m_dc=0.8)
    assert storage_delta(5.0, 0.0, params) == pytest.approx(4.5)
    assert storage_delta(0.0, 4.0, params) == pytest.approx(-5.0)
    assert storage_delta(2.0, 0.0, params, step_hours=0.5) == \
        pytest.approx(0.9)
    with pytest.raises(DomainError):
        storage_delta(6.0, 0.0, params)
    with pytest.raises(DomainError):
        storage_delta(0.0, -1.0, params)

    grid = TimeGrid.from_iso("2024-01-01T00:00:00Z", 24)
    tariff = Tariff.day_night(grid, 0.14, 0.09, 3.0)
    assert terminal_price(tariff, range(24), params) == \
        pytest.approx(0.09 / 0.9)
    assert terminal_price(tariff, range(8, 18), params) == \
        pytest.approx(0.14 / 0.9)
    with pytest.raises(DomainError):
        terminal_price(tariff, [], params)
    with pytest.raises(DomainError):
        terminal_price(tariff, range(30), params)


def test_exogenous_data_and_windows():
    data = ExogenousData(np.array([10.0, 20.0]), np.array([5.0, 25.0]))
    assert np.array_equal(data.net, [5.0, -5.0])
    win = data.window(1, 1)
    assert win.demand[0] == 20.0
    with pytest.raises(DomainError):
        data.window(1, 2)
    with pytest.raises(DomainError):
        ExogenousData(np.array([10.0]), np.array([-1.0]))
    back = ExogenousData.from_net(np.array([5.0, -5.0]))
    assert np.array_equal(back.net, [5.0, -5.0])
    assert np.array_equal(back.pv, [0.0, 5.0])


def test_battery_and_ensemble_validation():
    with pytest.raises(DomainError):
        BatteryParams(0.0, 1.0, 1.0, 0.9, 0.9)
    with pytest.raises(DomainError):
        BatteryParams(10.0, 1.0, 1.0, 1.1, 0.9)
    ens = ScenarioEnsemble(np.zeros((3, 5)))
    assert ens.j == 3 and ens.m == 5
    with pytest.raises(DomainError):
        ScenarioEnsemble(np.zeros(5))
    with pytest.raises(DomainError):
        ScenarioEnsemble(np.full((2, 2), np.inf))
