"""Closed-loop receding-horizon simulation and realized-cost accounting.

run_closed_loop walks truth one step at a time: it asks a forecast source
for a scenario ensemble, optionally error-filters it, builds and solves the
configured program, evaluates the resulting first-step policy on the
realization, repairs it into a feasible dispatch and advances the battery
and running-peak state. Planning modes that need no per-step solve
(NoStorage and the three full-knowledge baselines) replay a single plan
through the same repair path, so every trajectory obeys the same physics.

Costs are always scored by evaluate_true_cost on the realized trajectory
with the real calendar, whatever objective the planner used.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

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
from .errors import ClassificationError, ConfigError, DomainError, LpError
from .forecast import (
    DEFAULT_THRESHOLD,
    ISSUE_MIDNIGHT,
    ISSUE_NOON,
    DayClass,
    FilterState,
    ModelRegistry,
    PvHistory,
    WeatherScenario,
    apply_error_filter,
    classify_day,
    predict_pvusa,
    refit_models,
)
from .lp import LpStatus, solve
from .policy import Dispatch, advance_state, evaluate_policy, extract_policy, \
    repair_feasibility
from .problems import (
    IntraPeakWeighting,
    MpcState,
    PeakStrategy,
    PolicyStructure,
    build_det_mpc,
    build_full_horizon,
    build_stochastic,
    scenario_noise_sigma,
)


class SimMode(enum.Enum):
    """Planner run in the closed loop.

    FullHorizonOracle, EnergyOnly and DailyPeak solve one program over all
    data (the true objective, the objective without peak terms, and the
    objective charging daily instead of billing-period peaks) and replay it.
    DetMpc and StochMpc re-solve a window at every step. NoStorage never
    touches the battery.
    """
    FULL_HORIZON_ORACLE = "FullHorizonOracle"
    DET_MPC = "DetMpc"
    STOCH_MPC = "StochMpc"
    NO_STORAGE = "NoStorage"
    ENERGY_ONLY = "EnergyOnly"
    DAILY_PEAK = "DailyPeak"

    @classmethod
    def parse(cls, text: str) -> "SimMode":
        key = text.strip().lower()
        for mode in cls:
            if mode.value.lower() == key:
                return mode
        raise ConfigError(f"unknown simulation mode {text!r}")


_PLAN_ONCE = (SimMode.FULL_HORIZON_ORACLE, SimMode.ENERGY_ONLY,
              SimMode.DAILY_PEAK)


@dataclass(frozen=True)
class SimConfig:
    """Everything a closed-loop run needs besides the data itself.

    err_rmse is the forecast error level fed to scenario_noise_sigma; it
    only matters for StochMpc. The one seed covers every random draw a run
    makes (first-step noise, source perturbations).
    """
    mode: SimMode
    horizon_m: int = 24
    strategy: PeakStrategy = PeakStrategy.FULL_FULL
    intra: IntraPeakWeighting = field(default_factory=IntraPeakWeighting.off)
    structure: PolicyStructure = field(
        default_factory=PolicyStructure.constant_first_step)
    weighting_on: bool = True
    filter_alpha: float = 0.0
    refit: bool = False
    seed: int = 0
    err_rmse: float = 0.0

    def __post_init__(self):
        if not isinstance(self.mode, SimMode):
            raise ConfigError(f"mode must be a SimMode, got {self.mode!r}")
        if self.horizon_m < 1:
            raise ConfigError(f"horizon_m must be >= 1, got {self.horizon_m}")
        if not 0.0 <= self.filter_alpha <= 1.0:
            raise ConfigError(
                f"filter_alpha {self.filter_alpha} outside [0, 1]")
        if self.err_rmse < 0.0 or not math.isfinite(self.err_rmse):
            raise ConfigError(f"err_rmse {self.err_rmse} invalid")
        if (self.mode is SimMode.STOCH_MPC
                and self.structure.kind == "free"):
            raise ConfigError("a scenario-free program fixes no first step; "
                              "closed-loop StochMpc needs a policy structure")


@dataclass(frozen=True)
class Trajectory:
    """Realized closed-loop run: per-step dispatch plus the energy path.

    energy holds n_steps + 1 values (state before each step, then final);
    s_init is the running peak entering each step.
    """
    p_grid: np.ndarray
    p_c: np.ndarray
    p_dc: np.ndarray
    curtail: np.ndarray
    s_init: np.ndarray
    energy: np.ndarray

    def __post_init__(self):
        for name in ("p_grid", "p_c", "p_dc", "curtail", "s_init", "energy"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} must be a finite 1-D sequence")
        n = len(self.p_grid)
        if n == 0:
            raise DomainError("trajectory must contain at least one step")
        for name in ("p_c", "p_dc", "curtail", "s_init"):
            if len(getattr(self, name)) != n:
                raise DomainError(f"{name} length differs from p_grid")
        if len(self.energy) != n + 1:
            raise DomainError("energy must hold one more value than p_grid")

    @property
    def n_steps(self) -> int:
        return len(self.p_grid)


@dataclass(frozen=True)
class CostReport:
    """Realized cost split: energy + peak - terminal credit = total."""
    energy_cost: float
    peak_cost: float
    terminal_credit: float
    total: float
    peaks: tuple
    trajectory: Trajectory | None = None


def evaluate_true_cost(trajectory: Trajectory, tariff: Tariff,
                       calendar: PeakCalendar, battery: BatteryParams,
                       e_final: float) -> CostReport:
    """Score a realized trajectory against the real tariff and calendar.

    Peaks are per-period maxima of the realized grid purchases; stored
    energy left at the end is credited at the window's terminal price.
    """
    n = trajectory.n_steps
    if calendar.n_steps != n:
        raise DomainError(f"calendar covers {calendar.n_steps} steps but "
                          f"trajectory has {n}")
    if not math.isfinite(e_final) or e_final < 0.0:
        raise DomainError(f"final stored energy {e_final} invalid")
    prices = tariff.price_window(0, n)
    dt = calendar.step_hours
    energy_cost = float(np.dot(prices, trajectory.p_grid) * dt)
    peaks = []
    for q in range(1, calendar.n_periods + 1):
        start, end = calendar.period_span(q)
        peaks.append(float(trajectory.p_grid[start:end].max()))
    peak_cost = tariff.peak_price * float(sum(peaks))
    credit = terminal_price(tariff, range(n), battery) * float(e_final)
    total = energy_cost + peak_cost - credit
    return CostReport(energy_cost=energy_cost, peak_cost=peak_cost,
                      terminal_credit=credit, total=total,
                      peaks=tuple(peaks), trajectory=trajectory)


@dataclass(frozen=True)
class PerfectForecast:
    """Forecast source that hands back the truth as a one-member ensemble."""
    data: ExogenousData

    def ensemble(self, t: int, m: int) -> ScenarioEnsemble:
        return ScenarioEnsemble(self.data.window(t, m).net[None, :])


@dataclass(frozen=True)
class StaticEnsembleSource:
    """Windows sliced from one fixed (J, N) net-demand scenario matrix."""
    nets: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.nets, dtype=float)
        # reuse the ensemble checks (2-D, finite, nonempty)
        ScenarioEnsemble(arr)
        object.__setattr__(self, "nets", arr)

    def ensemble(self, t: int, m: int) -> ScenarioEnsemble:
        if t < 0 or t + m > self.nets.shape[1]:
            raise DomainError(f"window [{t}, {t + m}) outside the "
                              f"{self.nets.shape[1]}-step scenario matrix")
        return ScenarioEnsemble(self.nets[:, t:t + m])


def _solve_step(problem, t: int):
    sol = solve(problem)
    if sol.status is not LpStatus.OPTIMAL:
        err = LpError(f"step {t}: solver returned {sol.status.value}; "
                      "problem dump attached as .problem_dump")
        err.step = t
        err.problem_dump = problem.dump_text()
        raise err
    return sol


def _plan_setpoints(config: SimConfig, truth: ExogenousData, tariff: Tariff,
                    battery: BatteryParams, calendar: PeakCalendar,
                    e0: float) -> np.ndarray:
    n = truth.n_steps
    if config.mode is SimMode.ENERGY_ONLY:
        prob = build_det_mpc(truth, MpcState(t=0, e0=e0),
                             config.strategy, IntraPeakWeighting.off(),
                             False, tariff, battery, calendar,
                             include_peaks=False)
    elif config.mode is SimMode.DAILY_PEAK:
        per_day = 24.0 / calendar.step_hours
        if abs(per_day - round(per_day)) > 1e-9:
            raise DomainError("daily-peak planning needs a step length that "
                              "divides 24 hours")
        daily = PeakCalendar.uniform(n, min(n, int(round(per_day))),
                                     calendar.step_hours)
        prob = build_full_horizon(truth, tariff, battery, daily, e0)
    else:
        prob = build_full_horizon(truth, tariff, battery, calendar, e0)
    sol = _solve_step(prob, 0)
    return np.array([sol.value(prob, f"grid[{i}]") for i in range(n)])


def run_closed_loop(config: SimConfig, truth: ExogenousData, forecasts,
                    tariff: Tariff, battery: BatteryParams,
                    calendar: PeakCalendar, e0: float):
    """Simulate one run and return (Trajectory, CostReport).

    forecasts must offer ensemble(t, m) -> ScenarioEnsemble covering every
    window the configured horizon requests (windows truncate at the data
    end); a source may additionally offer maybe_refit(t), called at each
    step when config.refit is on. Plan-once modes and NoStorage never query
    the source.
    """
    n = truth.n_steps
    if calendar.n_steps != n:
        raise DomainError(f"calendar covers {calendar.n_steps} steps but "
                          f"truth has {n}")
    if not math.isfinite(e0) or not 0.0 <= e0 <= battery.e_max:
        raise DomainError(f"e0 {e0} outside [0, {battery.e_max}]")
    dt = calendar.step_hours
    net = truth.net

    plan = None
    if config.mode in _PLAN_ONCE:
        plan = _plan_setpoints(config, truth, tariff, battery, calendar, e0)

    state = MpcState(t=0, e0=float(e0))
    filt = FilterState(alpha=config.filter_alpha)
    cols = {k: np.empty(n) for k in
            ("p_grid", "p_c", "p_dc", "curtail", "s_init")}
    energy = np.empty(n + 1)

    for t in range(n):
        if config.refit and hasattr(forecasts, "maybe_refit"):
            forecasts.maybe_refit(t)
        r = float(net[t])
        pv_t = float(truth.pv[t])
        if config.mode is SimMode.NO_STORAGE:
            step = Dispatch(p_grid=max(r, 0.0), p_c=0.0, p_dc=0.0,
                            curtail=max(-r, 0.0))
        elif plan is not None:
            step = repair_feasibility(float(plan[t]), r, battery, state.e0,
                                      pv_t, dt)
        else:
            m_t = min(config.horizon_m, n - t)
            ens = forecasts.ensemble(t, m_t)
            if ens.m != m_t:
                raise DomainError(f"forecast source returned {ens.m} steps "
                                  f"for a {m_t}-step window at t={t}")
            corrected = np.vstack([apply_error_filter(row, filt)
                                   for row in ens.nets])
            if config.mode is SimMode.DET_MPC:
                window = ExogenousData.from_net(corrected.mean(axis=0))
                prob = build_det_mpc(window, state, config.strategy,
                                     config.intra, config.weighting_on,
                                     tariff, battery, calendar)
                sol = _solve_step(prob, t)
                setpoint = sol.value(prob, "grid[0]")
            else:
                scen = ScenarioEnsemble(corrected)
                sigma = scenario_noise_sigma(config.err_rmse, scen)
                prob = build_stochastic(scen, state, config.structure,
                                        config.strategy, config.intra,
                                        tariff, battery, calendar,
                                        noise=(sigma, [config.seed, 11, t]))
                sol = _solve_step(prob, t)
                setpoint = evaluate_policy(extract_policy(prob, sol), r)
            step = repair_feasibility(setpoint, r, battery, state.e0, pv_t,
                                      dt)
            filt = filt.observed(float(ens.nets[:, 0].mean()), r)

        cols["p_grid"][t] = step.p_grid
        cols["p_c"][t] = step.p_c
        cols["p_dc"][t] = step.p_dc
        cols["curtail"][t] = step.curtail
        cols["s_init"][t] = state.s_init
        energy[t] = state.e0
        state = advance_state(state, step, calendar, battery, dt)

    energy[n] = state.e0
    trajectory = Trajectory(energy=energy, **cols)
    report = evaluate_true_cost(trajectory, tariff, calendar, battery,
                                e_final=float(energy[n]))
    return trajectory, report


class ModelBackedSource:
    """Scenario source driven by the fitted forecast models.

    PV forecasts come from the registry's regression for the window's issue
    time (last midnight or noon) and day class (classified from the window's
    forecast irradiance against clear sky); demand comes from a point
    forecast series, for example a trained day-ahead network's outputs.
    Scenario spread perturbs irradiance. maybe_refit re-fits the registry
    from realized history whenever the step lands on an issue time.
    """

    def __init__(self, grid: TimeGrid, registry: ModelRegistry,
                 history: PvHistory, demand_forecast, spread_sd: float = 0.0,
                 n_scenarios: int = 1, seed: int = 0,
                 threshold: float = DEFAULT_THRESHOLD,
                 window_days: int = 10):
        demand = np.asarray(demand_forecast, dtype=float)
        if demand.ndim != 1 or len(demand) != grid.steps:
            raise DomainError("demand_forecast must cover the full grid")
        if spread_sd < 0.0 or n_scenarios < 1:
            raise DomainError("spread_sd must be >= 0 and n_scenarios >= 1")
        self.grid = grid
        self.registry = registry
        self.history = history
        self.demand = demand
        self.spread_sd = float(spread_sd)
        self.n_scenarios = int(n_scenarios)
        self.seed = int(seed)
        self.threshold = float(threshold)
        self.window_days = int(window_days)

    def _issue_of(self, t: int) -> str:
        return ISSUE_NOON if self.grid.hour_of_day(t) >= 12.0 else \
            ISSUE_MIDNIGHT

    def ensemble(self, t: int, m: int) -> ScenarioEnsemble:
        if t < 0 or t + m > self.grid.steps:
            raise DomainError(f"window [{t}, {t + m}) outside the grid")
        irr = self.history.irradiance[t:t + m]
        temp = self.history.temperature[t:t + m]
        cs = self.history.clearsky[t:t + m]
        try:
            day_class = classify_day(irr, cs, self.threshold)
        except ClassificationError:
            # no daylight in the window: the pv term is zero either way
            day_class = DayClass.CLEAR
        coeffs = self.registry.lookup(self._issue_of(t), day_class).coeffs
        rng = np.random.default_rng([self.seed, 13, t])
        issued = self.grid.timestamp(t)
        rows = []
        for j in range(1, self.n_scenarios + 1):
            bump = self.spread_sd * rng.standard_normal(m) if j > 1 else 0.0
            scen = WeatherScenario(np.maximum(irr + bump, 0.0), temp,
                                   issue_time=issued, scenario_id=j)
            rows.append(self.demand[t:t + m] - predict_pvusa(coeffs, scen))
        return ScenarioEnsemble(np.vstack(rows))

    def maybe_refit(self, t: int) -> None:
        self.registry = refit_models(self.registry, self.history,
                                     self.grid.timestamp(t),
                                     window_days=self.window_days,
                                     threshold=self.threshold)


@dataclass(frozen=True)
class SweepPoint:
    """One sweep run: the swept value, the config used, and its report."""
    param: str
    value: object
    config: SimConfig
    report: CostReport


_SWEEP_FIELDS = {"horizon_m": int, "seed": int, "filter_alpha": float,
                 "err_rmse": float, "weighting_on": bool, "refit": bool}


def _with_param(base: SimConfig, name: str, value) -> SimConfig:
    if name == "theta":
        intra = IntraPeakWeighting(float(value), base.intra.m1)
        return dataclasses.replace(base, intra=intra)
    if name == "m1":
        intra = IntraPeakWeighting(base.intra.theta, int(value))
        return dataclasses.replace(base, intra=intra)
    if name == "strategy":
        strat = value if isinstance(value, PeakStrategy) else \
            PeakStrategy.parse(str(value))
        return dataclasses.replace(base, strategy=strat)
    if name == "structure":
        if isinstance(value, PolicyStructure):
            struct = value
        else:
            m2 = base.structure.m2 if str(value) == "banded" else 0
            struct = PolicyStructure(str(value), m2)
        return dataclasses.replace(base, structure=struct)
    if name == "mode":
        mode = value if isinstance(value, SimMode) else SimMode.parse(
            str(value))
        return dataclasses.replace(base, mode=mode)
    if name in _SWEEP_FIELDS:
        return dataclasses.replace(base, **{name: _SWEEP_FIELDS[name](value)})
    raise ConfigError(f"unknown sweep parameter {name!r}")


def run_sweep(base: SimConfig, axis, truth: ExogenousData, forecasts,
              tariff: Tariff, battery: BatteryParams, calendar: PeakCalendar,
              e0: float):
    """Run one closed loop per axis value and return sorted SweepPoints.

    axis is a (parameter name, values) pair. Every run starts from the same
    base config, so points differ only in the swept parameter; sources are
    shared across points and must not carry state between runs.
    """
    name, values = axis
    values = list(values)
    if not values:
        raise ConfigError(f"sweep axis {name!r} has no values")
    try:
        ordered = sorted(values)
    except TypeError:
        ordered = sorted(values, key=str)
    points = []
    for value in ordered:
        config = _with_param(base, name, value)
        _, report = run_closed_loop(config, truth, forecasts, tariff,
                                    battery, calendar, e0)
        points.append(SweepPoint(param=name, value=value, config=config,
                                 report=report))
    return tuple(points)
