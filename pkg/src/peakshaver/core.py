"""Shared physical and economic data model for battery peak shaving.

Conventions: energies in kWh, powers in kW, prices in currency per kWh
(energy) or per kW (peak). Unit consistency is by convention and checked
in builders, not through a unit-type system.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import DomainError

kW = float
kWh = float

_BOUND_TOL = 1e-9


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Hourly (by default) timestep indexing anchored at a UTC hour boundary."""

    start: datetime
    steps: int
    step_hours: float = 1.0

    def __post_init__(self):
        if self.steps < 1:
            raise DomainError(f"steps must be >= 1, got {self.steps}")
        if self.step_hours <= 0:
            raise DomainError(f"step_hours must be > 0, got {self.step_hours}")
        if self.start.tzinfo is None or self.start.utcoffset() != timedelta(0):
            raise DomainError("start must be timezone-aware UTC")
        if self.start.minute or self.start.second or self.start.microsecond:
            raise DomainError("start must fall on an hour boundary")

    @classmethod
    def from_iso(cls, start: str, steps: int, step_hours: float = 1.0) -> "TimeGrid":
        return cls(parse_timestamp(start), steps, step_hours)

    def timestamp(self, t: int) -> datetime:
        if not 0 <= t <= self.steps:
            raise DomainError(f"step index {t} outside grid of {self.steps} steps")
        return self.start + timedelta(hours=t * self.step_hours)

    def hour_of_day(self, t: int) -> float:
        ts = self.start + timedelta(hours=t * self.step_hours)
        return ts.hour + ts.minute / 60.0

    def day_index(self, t: int) -> int:
        delta = self.start + timedelta(hours=t * self.step_hours) - _midnight(self.start)
        return delta.days


def _midnight(ts: datetime) -> datetime:
    return ts.replace(hour=0, minute=0, second=0, microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    raw = text.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise DomainError(f"bad ISO-8601 timestamp {text!r}: {exc}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class PeakCalendar:
    """Partition of the step range [0, n_steps) into billing (peak) periods.

    Period q (1-based) covers [boundaries[q-1], boundaries[q]), with the final
    declared period running to n_steps. Indices past n_steps extrapolate with
    the final period's length, so receding horizons near the end of the data
    still see a well-defined "next period".
    """

    boundaries: tuple
    n_steps: int
    step_hours: float = 1.0

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if not b or b[0] != 0:
            raise DomainError("boundaries must start at 0")
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise DomainError("boundaries must be strictly increasing")
        if b[-1] >= self.n_steps:
            raise DomainError("last boundary must be < n_steps")
        if self.n_steps < 1 or self.step_hours <= 0:
            raise DomainError("n_steps must be >= 1 and step_hours > 0")

    @classmethod
    def uniform(cls, n_steps: int, period_steps: int, step_hours: float = 1.0) -> "PeakCalendar":
        if period_steps < 1:
            raise DomainError("period_steps must be >= 1")
        return cls(tuple(range(0, n_steps, period_steps)), n_steps, step_hours)

    @property
    def n_periods(self) -> int:
        return len(self.boundaries)

    def _tail_length(self) -> int:
        return self.n_steps - self.boundaries[-1]

    def period_of(self, t: int) -> int:
        if t < 0:
            raise DomainError(f"step index {t} is negative")
        if t < self.n_steps:
            return bisect_right(self.boundaries, t)
        return self.n_periods + 1 + (t - self.n_steps) // self._tail_length()

    def period_span(self, q: int):
        """Half-open step range (start, end) of period q."""
        if q < 1:
            raise DomainError(f"period index {q} must be >= 1")
        nq = self.n_periods
        if q <= nq:
            start = self.boundaries[q - 1]
            end = self.boundaries[q] if q < nq else self.n_steps
            return start, end
        tail = self._tail_length()
        start = self.n_steps + (q - nq - 1) * tail
        return start, start + tail

    def period_length_hours(self, q: int) -> float:
        start, end = self.period_span(q)
        return (end - start) * self.step_hours


@dataclass(frozen=True)
class Tariff:
    """Time-of-use purchase prices plus a per-period demand charge.

    buy_price may extend past the scoring horizon so receding-horizon windows
    near the end of the data still have prices.
    """

    buy_price: np.ndarray
    peak_price: float

    def __post_init__(self):
        arr = _as_float_array(self.buy_price, "buy_price")
        object.__setattr__(self, "buy_price", arr)
        if np.any(arr <= 0):
            raise DomainError("all purchase prices must be strictly positive")
        if not (np.isfinite(self.peak_price) and self.peak_price > 0):
            raise DomainError("peak_price must be strictly positive")

    @classmethod
    def day_night(cls, grid: TimeGrid, day_rate: float, night_rate: float,
                  peak_price: float, day_start: int = 7, day_end: int = 20,
                  extra_steps: int = 0) -> "Tariff":
        n = grid.steps + extra_steps
        hours = (np.arange(n) * grid.step_hours + grid.hour_of_day(0)) % 24.0
        day = (hours >= day_start) & (hours < day_end)
        prices = np.where(day, float(day_rate), float(night_rate))
        return cls(prices, peak_price)

    def price_window(self, t: int, m: int) -> np.ndarray:
        if t < 0 or t + m > len(self.buy_price):
            raise DomainError(
                f"price window [{t}, {t + m}) outside tariff of {len(self.buy_price)} steps")
        return self.buy_price[t:t + m]


@dataclass(frozen=True)
class BatteryParams:
    e_max: kWh
    p_c_max: kW
    p_dc_max: kW
    m_c: float
    m_dc: float

    def __post_init__(self):
        if self.e_max <= 0:
            raise DomainError(f"e_max must be > 0, got {self.e_max}")
        if self.p_c_max < 0 or self.p_dc_max < 0:
            raise DomainError("power limits must be >= 0")
        if not 0 < self.m_c <= 1 or not 0 < self.m_dc <= 1:
            raise DomainError("efficiencies must lie in (0, 1]")


@dataclass(frozen=True)
class ExogenousData:
    """Realized or forecast building demand and PV production, in kW."""

    demand: np.ndarray
    pv: np.ndarray

    def __post_init__(self):
        demand = _as_float_array(self.demand, "demand")
        pv = _as_float_array(self.pv, "pv")
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "pv", pv)
        if len(demand) != len(pv):
            raise DomainError(
                f"demand has {len(demand)} steps but pv has {len(pv)}")
        if np.any(demand < 0) or np.any(pv < 0):
            raise DomainError("demand and pv must be >= 0 elementwise")

    @property
    def n_steps(self) -> int:
        return len(self.demand)

    @property
    def net(self) -> np.ndarray:
        return self.demand - self.pv

    def window(self, t: int, m: int) -> "ExogenousData":
        if t < 0 or t + m > self.n_steps:
            raise DomainError(
                f"window [{t}, {t + m}) outside data of {self.n_steps} steps")
        return ExogenousData(self.demand[t:t + m], self.pv[t:t + m])

    @classmethod
    def from_net(cls, net) -> "ExogenousData":
        # Net-demand forecasts carry no demand/PV split; any split with the
        # right difference yields the same problems downstream.
        arr = np.asarray(net, dtype=float)
        return cls(np.maximum(arr, 0.0), np.maximum(-arr, 0.0))


@dataclass(frozen=True)
class ScenarioEnsemble:
    """J equally weighted net-demand forecast trajectories over an M-step window."""

    nets: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.nets, dtype=float)
        if arr.ndim != 2:
            raise DomainError(f"nets must be 2-D (J, M), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DomainError("ensemble needs at least one scenario and one step")
        if not np.all(np.isfinite(arr)):
            raise DomainError("nets contains non-finite values")
        object.__setattr__(self, "nets", arr)

    @property
    def j(self) -> int:
        return self.nets.shape[0]

    @property
    def m(self) -> int:
        return self.nets.shape[1]


def storage_delta(p_c: kW, p_dc: kW, params: BatteryParams, step_hours: float = 1.0) -> kWh:
    """Change in stored energy for one step of charging p_c and discharging p_dc."""
    tol = _BOUND_TOL * max(1.0, params.p_c_max, params.p_dc_max)
    if not -tol <= p_c <= params.p_c_max + tol:
        raise DomainError(f"p_c={p_c} outside [0, {params.p_c_max}]")
    if not -tol <= p_dc <= params.p_dc_max + tol:
        raise DomainError(f"p_dc={p_dc} outside [0, {params.p_dc_max}]")
    if step_hours <= 0:
        raise DomainError("step_hours must be > 0")
    return (params.m_c * p_c - p_dc / params.m_dc) * step_hours


def terminal_price(tariff: Tariff, window, params: BatteryParams) -> float:
    """Per-kWh value of energy stored at the end of a window.

    The stored energy is valued at the cheapest purchase price over the
    window, grossed up by the charge efficiency.
    """
    idx = np.asarray(list(window) if not isinstance(window, np.ndarray) else window, dtype=int)
    if idx.size == 0:
        raise DomainError("terminal_price needs a nonempty window")
    if idx.min() < 0 or idx.max() >= len(tariff.buy_price):
        raise DomainError("window outside tariff price range")
    return float(tariff.buy_price[idx].min()) / params.m_c
