"""Dispatch-window linear programs.

Three related programs share one window assembly: the full-horizon problem
with knowledge of all data, the deterministic receding-horizon problem, and
the scenario-based stochastic problem with a choice of first-step policy
structure. All of them minimize energy cost plus weighted demand-charge
terms minus a terminal credit on stored energy.

Variables are window-local and named (grid[i], charge[i], discharge[i],
energy[i], peak[q]); stochastic problems add a scenario suffix (grid[i,j])
and structure variables (a[0], b[0], A[i,l], b[i]). Builders attach a crash
basis hint in problem.meta so the solver can skip most of phase 1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BatteryParams,
    ExogenousData,
    PeakCalendar,
    ScenarioEnsemble,
    Tariff,
    terminal_price,
)
from .errors import DomainError
from .lp import LpBuilder, add_epigraph_max

_INF = math.inf


class PeakStrategy(enum.Enum):
    """How peaks of partially covered billing periods are priced.

    FULL_FULL charges every period peak in the window at full weight,
    PARTIAL_PARTIAL weights each by the share of the window lying in that
    period, and FULL_PARTIAL charges the current period fully but later
    periods only by their remaining window share.
    """
    FULL_FULL = "ff"
    PARTIAL_PARTIAL = "pp"
    FULL_PARTIAL = "fp"

    @classmethod
    def parse(cls, text: str) -> "PeakStrategy":
        key = text.strip().lower()
        aliases = {
            "ff": cls.FULL_FULL, "full-full": cls.FULL_FULL,
            "pp": cls.PARTIAL_PARTIAL, "partial-partial": cls.PARTIAL_PARTIAL,
            "fp": cls.FULL_PARTIAL, "full-partial": cls.FULL_PARTIAL,
        }
        if key not in aliases:
            raise DomainError(f"unknown peak strategy {text!r}")
        return aliases[key]


@dataclass(frozen=True)
class IntraPeakWeighting:
    """Split each peak penalty between the first m1 steps and the whole window.

    theta is the weight on the early sub-window peak; 1 - theta stays on the
    full-window peak. theta == 0 disables the split entirely.
    """
    theta: float = 0.0
    m1: int = 0

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError(f"theta {self.theta} outside [0, 1]")
        if self.m1 < 0:
            raise DomainError("m1 must be nonnegative")
        if self.theta > 0.0 and self.m1 == 0:
            raise DomainError("theta > 0 needs a positive early window m1")

    @classmethod
    def off(cls) -> "IntraPeakWeighting":
        return cls(0.0, 0)


_STRUCTURES = ("free", "constant", "affine", "banded")


@dataclass(frozen=True)
class PolicyStructure:
    """Coupling of scenario decisions: none, shared value, affine, or banded.

    kind "free" leaves every scenario independent (a lower bound, not an
    implementable controller). "constant" forces one shared first-step grid
    draw, "affine" an affine function of the realized first-step net demand,
    and "banded" an affine causal policy over the whole window whose row i
    sees net demand steps max(0, i - m2)..i.
    """
    kind: str
    m2: int = 0

    def __post_init__(self):
        if self.kind not in _STRUCTURES:
            raise DomainError(f"unknown policy structure {self.kind!r}")
        if self.m2 < 0:
            raise DomainError("m2 must be nonnegative")
        if self.kind != "banded" and self.m2 != 0:
            raise DomainError(f"structure {self.kind!r} does not take m2")

    @classmethod
    def scenario_free(cls) -> "PolicyStructure":
        return cls("free")

    @classmethod
    def constant_first_step(cls) -> "PolicyStructure":
        return cls("constant")

    @classmethod
    def affine_first_step(cls) -> "PolicyStructure":
        return cls("affine")

    @classmethod
    def banded_causal(cls, m2: int) -> "PolicyStructure":
        return cls("banded", int(m2))


@dataclass(frozen=True)
class MpcState:
    """Window initial conditions: start step, stored energy, running peak."""
    t: int
    e0: float
    s_init: float = 0.0

    def __post_init__(self):
        if self.t < 0:
            raise DomainError("window start must be nonnegative")
        if not math.isfinite(self.e0) or self.e0 < 0.0:
            raise DomainError(f"stored energy {self.e0} invalid")
        if not math.isfinite(self.s_init) or self.s_init < 0.0:
            raise DomainError(f"running peak {self.s_init} invalid")


def compute_beta(t: int, m: int, calendar: PeakCalendar) -> float:
    """Share of the m window steps from t that fall in the current period."""
    if m < 1:
        raise DomainError("window must contain at least one step")
    start, end = calendar.period_span(calendar.period_of(t))
    return (min(t + m, end) - t) / m


def peak_cost_terms(strategy: PeakStrategy, beta, p_peak: float,
                    intra: IntraPeakWeighting):
    """Objective coefficients (full, early) per window period.

    beta is either the current-period window share, or the full list of
    per-period shares for windows spanning more than two periods. The early
    coefficient carries the theta split; callers that create no early peak
    variable for a period should charge full + early on the one peak.
    """
    if np.isscalar(beta):
        b = float(beta)
        if not 0.0 <= b <= 1.0:
            raise DomainError(f"beta {b} outside [0, 1]")
        shares = (b,) if b == 1.0 else (b, 1.0 - b)
    else:
        shares = tuple(float(s) for s in beta)
    if not shares:
        raise DomainError("at least one period share required")
    if any(s < 0.0 or s > 1.0 for s in shares) or sum(shares) > 1.0 + 1e-9:
        raise DomainError(f"bad period shares {shares}")

    if strategy is PeakStrategy.FULL_FULL:
        weights = [1.0] * len(shares)
    elif strategy is PeakStrategy.PARTIAL_PARTIAL:
        weights = list(shares)
    else:
        weights = [1.0]
        for r in range(1, len(shares)):
            weights.append(1.0 - sum(shares[:r]))
    th = intra.theta
    return [(p_peak * (1.0 - th) * w, p_peak * th * w) for w in weights]


def scenario_noise_sigma(err_rmse: float, scenarios: ScenarioEnsemble) -> float:
    """Width of first-step noise: forecast RMSE in excess of the scenario range."""
    if err_rmse < 0.0:
        raise DomainError("error RMSE must be nonnegative")
    first = scenarios.nets[:, 0]
    return max(float(err_rmse) - float(first.max() - first.min()), 0.0)


def _window_periods(calendar: PeakCalendar, t: int, m: int):
    groups = []
    for i in range(m):
        q = calendar.period_of(t + i)
        if not groups or groups[-1][0] != q:
            groups.append((q, []))
        groups[-1][1].append(i)
    return groups


def _period_costs(groups, m, strategy, intra, wfac, p_peak):
    """Per period: (full cost, early cost, early step list)."""
    if not groups:
        return []
    shares = [len(steps) / m for _, steps in groups]
    pairs = peak_cost_terms(strategy, shares, p_peak, intra)
    out = []
    for (q, steps), (full, early) in zip(groups, pairs):
        esteps = [i for i in steps if i < intra.m1] if intra.theta > 0.0 else []
        if esteps:
            out.append((wfac * full, wfac * early, esteps))
        else:
            out.append((wfac * (full + early), 0.0, []))
    return out


def _check_state(state: MpcState, battery: BatteryParams):
    if state.e0 > battery.e_max + 1e-9:
        raise DomainError(
            f"stored energy {state.e0} exceeds capacity {battery.e_max}")


def _add_block(b: LpBuilder, nets_row, prices, battery, state, groups, costs,
               p_term, step_hours, label):
    """Variables and rows for one scenario; returns indices and crash pairs."""
    m = len(nets_row)
    mc_dt = battery.m_c * step_hours
    dc_dt = step_hours / battery.m_dc
    g, c, d = [], [], []
    for i in range(m):
        g.append(b.add_var(f"grid[{i}{label}]", 0.0, _INF,
                           float(prices[i]) * step_hours))
        c.append(b.add_var(f"charge[{i}{label}]", 0.0, battery.p_c_max))
        d.append(b.add_var(f"discharge[{i}{label}]", 0.0, battery.p_dc_max))
    e0 = min(state.e0, battery.e_max)
    e = [b.add_var(f"energy[0{label}]", e0, e0)]
    for i in range(1, m):
        e.append(b.add_var(f"energy[{i}{label}]", 0.0, battery.e_max))
    e.append(b.add_var(f"energy[{m}{label}]", 0.0, battery.e_max, -p_term))

    cur_q = groups[0][0] if groups else None
    peaks, early = {}, {}
    for (q, steps), (full, early_cost, esteps) in zip(groups, costs):
        lb = state.s_init if q == cur_q else 0.0
        peaks[q] = b.add_var(f"peak[{q}{label}]", lb, _INF, full)
        if esteps:
            early[q] = b.add_var(f"peak_early[{q}{label}]", lb, _INF, early_cost)

    crash = []
    row = b.n_rows
    for i in range(m):
        b.add_le([(c[i], 1.0), (d[i], -1.0), (g[i], -1.0)], -float(nets_row[i]))
        if nets_row[i] > 0.0:
            crash.append((row + i, g[i]))
    row = b.n_rows
    for i in range(m):
        b.add_eq([(e[i + 1], 1.0), (e[i], -1.0), (c[i], -mc_dt), (d[i], dc_dt)],
                 0.0)
        crash.append((row + i, e[i + 1]))
    for (q, steps), _ in zip(groups, costs):
        row = b.n_rows
        add_epigraph_max(b, peaks[q], [[(g[i], 1.0)] for i in steps])
        k = int(np.argmax([nets_row[i] for i in steps]))
        lb = state.s_init if q == cur_q else 0.0
        if nets_row[steps[k]] > 0.0 and nets_row[steps[k]] >= lb:
            crash.append((row + k, peaks[q]))
    for (q, steps), (_, _, esteps) in zip(groups, costs):
        if q not in early:
            continue
        row = b.n_rows
        add_epigraph_max(b, early[q], [[(g[i], 1.0)] for i in esteps])
        k = int(np.argmax([nets_row[i] for i in esteps]))
        lb = state.s_init if q == cur_q else 0.0
        if nets_row[esteps[k]] > 0.0 and nets_row[esteps[k]] >= lb:
            crash.append((row + k, early[q]))
    return g, e, crash


def build_full_horizon(data: ExogenousData, tariff: Tariff,
                       battery: BatteryParams, calendar: PeakCalendar,
                       e0: float):
    """One program over all data with every period peak charged in full."""
    n = data.n_steps
    state = MpcState(t=0, e0=e0)
    _check_state(state, battery)
    prices = tariff.price_window(0, n)
    p_term = terminal_price(tariff, range(0, n), battery)
    groups = _window_periods(calendar, 0, n)
    costs = _period_costs(groups, n, PeakStrategy.FULL_FULL,
                          IntraPeakWeighting.off(), 1.0, tariff.peak_price)
    b = LpBuilder()
    _, _, crash = _add_block(b, data.net, prices, battery, state, groups,
                             costs, p_term, calendar.step_hours, "")
    return b.build({"crash_basis": crash})


def build_det_mpc(window: ExogenousData, state: MpcState,
                  strategy: PeakStrategy, intra: IntraPeakWeighting,
                  weighting_on: bool, tariff: Tariff, battery: BatteryParams,
                  calendar: PeakCalendar, include_peaks: bool = True):
    """Receding-horizon program on a point forecast of the window."""
    m = window.n_steps
    _check_state(state, battery)
    prices = tariff.price_window(state.t, m)
    p_term = terminal_price(tariff, range(state.t, state.t + m), battery)
    groups = _window_periods(calendar, state.t, m) if include_peaks else []
    if groups and weighting_on:
        wfac = (m * calendar.step_hours
                / calendar.period_length_hours(groups[0][0]))
    else:
        wfac = 1.0
    costs = _period_costs(groups, m, strategy, intra, wfac, tariff.peak_price)
    b = LpBuilder()
    _, _, crash = _add_block(b, window.net, prices, battery, state, groups,
                             costs, p_term, calendar.step_hours, "")
    return b.build({"crash_basis": crash})


def build_stochastic(ensemble: ScenarioEnsemble, state: MpcState,
                     structure: PolicyStructure, strategy: PeakStrategy,
                     intra: IntraPeakWeighting, tariff: Tariff,
                     battery: BatteryParams, calendar: PeakCalendar,
                     noise=None):
    """Scenario program whose cost is summed over the ensemble.

    noise is an optional (sigma, seed) pair; sigma > 0 adds one Gaussian
    draw per scenario to the first-step net demand before the program is
    assembled, widening the range the extracted policy must cover.
    """
    nets = ensemble.nets.copy()
    nscen, m = nets.shape
    _check_state(state, battery)
    if noise is not None:
        sigma, seed = noise
        if sigma < 0.0:
            raise DomainError("noise sigma must be nonnegative")
        if sigma > 0.0:
            nets[:, 0] += np.random.default_rng(seed).normal(0.0, sigma, nscen)

    prices = tariff.price_window(state.t, m)
    p_term = terminal_price(tariff, range(state.t, state.t + m), battery)
    groups = _window_periods(calendar, state.t, m)
    wfac = m * calendar.step_hours / calendar.period_length_hours(groups[0][0])
    costs = _period_costs(groups, m, strategy, intra, wfac, tariff.peak_price)

    b = LpBuilder()
    grids = []
    crash = []
    for j in range(1, nscen + 1):
        g, _, blk = _add_block(b, nets[j - 1], prices, battery, state, groups,
                               costs, p_term, calendar.step_hours, f",{j}")
        grids.append(g)
        crash.extend(blk)

    if structure.kind == "constant":
        for j in range(1, nscen):
            b.add_eq([(grids[j][0], 1.0), (grids[0][0], -1.0)], 0.0)
    elif structure.kind == "affine":
        a0 = b.add_var("a[0]", -_INF, _INF)
        b0 = b.add_var("b[0]", -_INF, _INF)
        for j in range(nscen):
            coeffs = [(grids[j][0], 1.0), (b0, -1.0)]
            if nets[j, 0] != 0.0:
                coeffs.insert(1, (a0, -float(nets[j, 0])))
            b.add_eq(coeffs, 0.0)
    elif structure.kind == "banded":
        a_vars, b_vars = {}, []
        for i in range(m):
            for l in range(max(0, i - structure.m2), i + 1):
                a_vars[i, l] = b.add_var(f"A[{i},{l}]", -_INF, _INF)
            b_vars.append(b.add_var(f"b[{i}]", -_INF, _INF))
        for i in range(m):
            band = range(max(0, i - structure.m2), i + 1)
            for j in range(nscen):
                coeffs = [(grids[j][i], 1.0)]
                coeffs.extend((a_vars[i, l], -float(nets[j, l]))
                              for l in band if nets[j, l] != 0.0)
                coeffs.append((b_vars[i], -1.0))
                b.add_eq(coeffs, 0.0)

    policy = {"kind": structure.kind, "m2": structure.m2,
              "lo0": float(nets[:, 0].min()), "hi0": float(nets[:, 0].max())}
    return b.build({"crash_basis": crash, "policy": policy})
