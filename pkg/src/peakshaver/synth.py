"""Seeded synthetic datasets and a discretized dynamic-programming oracle.

The generator produces diurnal PV and office-like demand with a weekday and
weekend contrast, consistent irradiance, temperature and clear-sky curves,
and a per-step scenario-ensemble source whose spread grows linearly with
lead time. Everything is a pure function of the SynthSpec seed.

The oracle solves tiny instances by exhaustive backward induction over a
discretized (stored energy, running peak) state. Both state axes are grids,
actions move the energy to another grid point, and the running peak is
rounded up to its grid, so every oracle trajectory is feasible for the
continuous problem and the oracle value converges to the optimum from above
as the grids are refined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BatteryParams,
    ExogenousData,
    PeakCalendar,
    ScenarioEnsemble,
    Tariff,
    TimeGrid,
    terminal_price,
)
from .errors import DomainError

# PVUSA plant response: power = irradiance * (a + b*irradiance + c*temp),
# scaled so the plant delivers its nameplate rating at 1000 W/m2 and 25 C.
PVUSA_TRUE = (1.1e-3, -5.0e-8, -4.5e-6)

_DP_MAX_STEPS = 8
_DP_MAX_LEVELS = 64
_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class SynthSpec:
    """Knobs for the synthetic dataset generator."""

    days: int
    pv_peak_kw: float = 40.0
    demand_base_kw: float = 20.0
    demand_peak_kw: float = 55.0
    weekend_factor: float = 0.35
    noise_sd: float = 1.5
    scenario_spread_sd: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.days < 1:
            raise DomainError(f"days must be >= 1, got {self.days}")
        for name in ("pv_peak_kw", "demand_base_kw", "demand_peak_kw",
                     "noise_sd", "scenario_spread_sd"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {v}")
        if not 0.0 <= self.weekend_factor <= 1.0:
            raise DomainError(
                f"weekend_factor must lie in [0, 1], got {self.weekend_factor}")
        if self.demand_peak_kw < self.demand_base_kw:
            raise DomainError("demand_peak_kw must be >= demand_base_kw")


@dataclass(frozen=True)
class SynthWeather:
    """Weather companion series for the generated dataset."""

    grid: TimeGrid
    clearsky_wm2: np.ndarray
    irradiance_wm2: np.ndarray
    temp_c: np.ndarray


def pvusa_power(irradiance, temp, rating_kw: float,
                coeffs=PVUSA_TRUE) -> np.ndarray:
    """Plant output for the given weather under the PVUSA response model."""
    irr = np.asarray(irradiance, dtype=float)
    t = np.asarray(temp, dtype=float)
    a, b, c = coeffs
    per_unit = irr * (a + b * irr + c * t)
    at_rating = 1000.0 * (a + b * 1000.0 + c * 25.0)
    return np.maximum(per_unit, 0.0) * (rating_kw / at_rating)


class SyntheticEnsembleSource:
    """Per-step forecast ensembles: truth plus correlated perturbations.

    Scenario j at lead i carries truth + spread_sd*(i+1)*g_j[i] where g_j is
    a stationary unit-variance AR(1) sequence, so the ensemble spread grows
    linearly with lead time while staying correlated across leads. Draws
    depend only on (seed, t): repeated calls are bit-identical.
    """

    def __init__(self, truth: ExogenousData, spread_sd: float,
                 n_scenarios: int = 21, seed: int = 0):
        if n_scenarios < 1:
            raise DomainError(f"need at least one scenario, got {n_scenarios}")
        if not (math.isfinite(spread_sd) and spread_sd >= 0):
            raise DomainError(f"spread_sd must be finite and >= 0, got {spread_sd}")
        self._net = truth.net
        self.spread_sd = float(spread_sd)
        self.n_scenarios = int(n_scenarios)
        self.seed = int(seed)

    def ensemble(self, t: int, m: int) -> ScenarioEnsemble:
        if t < 0 or m < 1 or t + m > len(self._net):
            raise DomainError(
                f"ensemble window [{t}, {t + m}) outside data of "
                f"{len(self._net)} steps")
        base = self._net[t:t + m][None, :]
        if self.spread_sd == 0.0:
            return ScenarioEnsemble(np.repeat(base, self.n_scenarios, axis=0))
        rng = np.random.default_rng([self.seed, 7, t])
        shocks = rng.standard_normal((self.n_scenarios, m))
        g = np.empty_like(shocks)
        g[:, 0] = shocks[:, 0]
        rho = 0.9
        fresh = math.sqrt(1.0 - rho * rho)
        for i in range(1, m):
            g[:, i] = rho * g[:, i - 1] + fresh * shocks[:, i]
        leads = np.arange(1, m + 1, dtype=float)[None, :]
        return ScenarioEnsemble(base + self.spread_sd * leads * g)


def _day_shape(hours: np.ndarray) -> np.ndarray:
    # half sine between 06:00 and 18:00
    up = np.sin(np.pi * (hours - 6.0) / 12.0)
    return np.where((hours >= 6.0) & (hours <= 18.0), np.maximum(up, 0.0), 0.0)


def _office_shape(hours: np.ndarray) -> np.ndarray:
    # working-hours hump with a lunch dip
    hump = np.sin(np.pi * (hours - 7.0) / 12.0)
    hump = np.where((hours >= 7.0) & (hours <= 19.0), np.maximum(hump, 0.0), 0.0)
    dip = 0.22 * np.exp(-0.5 * ((hours - 12.5) / 1.2) ** 2)
    return np.maximum(hump - dip, 0.0)


def generate(spec: SynthSpec):
    """Build (truth data, scenario source, weather) from a spec.

    PV follows a half-sine daytime profile scaled by a per-day clearness
    factor; demand is a base load plus a working-hours bump that weekends
    scale down by weekend_factor. 2024-01-01 is a Monday, so day indices
    0-4 of each week are weekdays.
    """
    n = spec.days * 24
    grid = TimeGrid.from_iso("2024-01-01T00:00:00Z", n)
    rng = np.random.default_rng(spec.seed)

    hours = np.array([grid.hour_of_day(t) for t in range(n)])
    days = np.array([grid.day_index(t) for t in range(n)])
    weekend = np.array(
        [grid.timestamp(t).weekday() >= 5 for t in range(n)], dtype=bool)

    # clear days cluster near 1, cloudy days sit well below the 0.8 threshold
    clear_mask = rng.random(spec.days) < 0.6
    clearness_day = np.where(clear_mask,
                             rng.uniform(0.88, 1.0, spec.days),
                             rng.uniform(0.25, 0.62, spec.days))
    clearness = clearness_day[days]

    shape = _day_shape(hours)
    clearsky = 1000.0 * shape
    irradiance = clearsky * clearness
    temp = 8.0 + 10.0 * shape * clearness + 0.5 * rng.standard_normal(n)

    pv = pvusa_power(irradiance, temp, spec.pv_peak_kw)
    daylight = shape > 0.0
    pv = pv + spec.noise_sd * rng.standard_normal(n) * daylight
    pv = np.maximum(pv, 0.0)

    bump = (spec.demand_peak_kw - spec.demand_base_kw) * _office_shape(hours)
    bump = np.where(weekend, spec.weekend_factor * bump, bump)
    demand = spec.demand_base_kw + bump + spec.noise_sd * rng.standard_normal(n)
    demand = np.maximum(demand, 0.0)

    truth = ExogenousData(demand, pv)
    source = SyntheticEnsembleSource(truth, spec.scenario_spread_sd,
                                     seed=spec.seed)
    weather = SynthWeather(grid, clearsky, irradiance, temp)
    return truth, source, weather


def _snap_up(values: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Index of the smallest level >= each value (modulo a rounding pad)."""
    idx = np.searchsorted(levels, values - _SNAP_TOL, side="left")
    return np.minimum(idx, len(levels) - 1)


def dp_oracle(data: ExogenousData, tariff: Tariff, battery: BatteryParams,
              calendar: PeakCalendar, e0: float, grid_levels: int,
              energy_levels: int) -> float:
    """Optimal cost of the discretized peak-shaving problem, by enumeration.

    Stored energy moves between points of a fixed grid; the running peak is
    tracked on a grid of its own and rounded up after every step. Rounding
    up keeps every discretized trajectory feasible for (and so never cheaper
    than) the continuous problem. The peak charge is applied when a billing
    period closes. Refining nested grids can only lower the result.
    """
    n = data.n_steps
    if n > _DP_MAX_STEPS:
        raise DomainError(
            f"oracle instance has {n} steps; enumeration allows {_DP_MAX_STEPS}")
    for label, k in (("grid_levels", grid_levels),
                     ("energy_levels", energy_levels)):
        if not 1 <= k <= _DP_MAX_LEVELS:
            raise DomainError(
                f"{label} must lie in [1, {_DP_MAX_LEVELS}], got {k}")
    if not 0.0 <= e0 <= battery.e_max:
        raise DomainError(f"e0={e0} outside [0, {battery.e_max}]")
    if calendar.n_steps != n:
        raise DomainError(
            f"calendar covers {calendar.n_steps} steps, data has {n}")

    dt = calendar.step_hours
    prices = tariff.price_window(0, n)
    net = data.net
    dem = data.demand
    p_term = terminal_price(tariff, range(n), battery)
    p_peak = tariff.peak_price

    egrid = np.union1d(np.linspace(0.0, battery.e_max, energy_levels),
                       [float(e0)])
    ne = len(egrid)
    e0_idx = int(np.searchsorted(egrid, e0))

    pos_net = np.maximum(net, 0.0)
    periods = np.array([calendar.period_of(t) for t in range(n)])
    peak_ns = [pos_net[periods == q].max() for q in np.unique(periods)]
    dense_hi = max(peak_ns)
    # a period's peak is at least its no-storage peak less one step of full
    # discharge, so peak levels below that bound never decide the charge
    dense_lo = max(0.0, min(peak_ns) - battery.p_dc_max)
    g_max = float(pos_net.max() + battery.p_c_max)
    sgrid = np.union1d(np.linspace(dense_lo, dense_hi, grid_levels),
                       np.concatenate([peak_ns, pos_net, [0.0, g_max]]))
    ns = len(sgrid)

    d_e = egrid[None, :] - egrid[:, None]
    p_c = np.maximum(d_e, 0.0) / (battery.m_c * dt)
    p_dc = np.maximum(-d_e, 0.0) * battery.m_dc / dt
    tol = 1e-9 * max(1.0, battery.p_c_max, battery.p_dc_max)
    power_ok = (p_c <= battery.p_c_max + tol) & (p_dc <= battery.p_dc_max + tol)

    # value-to-go after the final step: peak charges all settled, terminal credit
    value = np.repeat(-p_term * egrid[:, None], ns, axis=1)

    cols = np.arange(ne)[None, :]
    for t in range(n - 1, -1, -1):
        g = np.maximum(net[t] + p_c - p_dc, 0.0)
        feasible = power_ok & (p_dc <= dem[t] + tol)
        cost = np.where(feasible, prices[t] * dt * g, np.inf)
        snap = _snap_up(g, sgrid)
        closes = t == n - 1 or periods[t + 1] != periods[t]
        nxt = np.empty_like(value)
        if closes:
            settled = value[:, 0][None, :]
            for s in range(ns):
                reached = np.maximum(s, snap)
                total = cost + p_peak * sgrid[reached] + settled
                nxt[:, s] = total.min(axis=1)
        else:
            for s in range(ns):
                reached = np.maximum(s, snap)
                total = cost + value[cols, reached]
                nxt[:, s] = total.min(axis=1)
        value = nxt

    return float(value[e0_idx, 0])
