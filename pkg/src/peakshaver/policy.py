"""First-step dispatch policies, feasibility repair, and state advance.

A solved stochastic window yields a policy mapping the realized first-step
net demand to a grid purchase. Applying it can violate battery power or
energy limits when the realization falls outside the forecast range, so the
applied dispatch always passes through repair_feasibility, which restores
the power balance by curtailing surplus PV or buying extra grid power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import BatteryParams, PeakCalendar, storage_delta
from .errors import ConfigError, DomainError
from .lp import LpStatus
from .problems import MpcState


@dataclass(frozen=True)
class ConstantPolicy:
    """One grid purchase regardless of the realization."""
    value: float

    def evaluate(self, realization: float) -> float:
        return max(0.0, self.value)


@dataclass(frozen=True)
class SaturatedAffinePolicy:
    """Affine in the realization, saturated to the forecast hull [lo, hi]."""
    a: float
    b: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError(f"empty hull [{self.lo}, {self.hi}]")

    def evaluate(self, realization: float) -> float:
        r = min(max(realization, self.lo), self.hi)
        return max(0.0, self.a * r + self.b)


@dataclass(frozen=True)
class Dispatch:
    """Applied powers for one step, all in kW."""
    p_grid: float
    p_c: float
    p_dc: float
    curtail: float


def extract_policy(problem, solution):
    """Pull the applied first-step policy out of a solved stochastic window."""
    info = problem.meta.get("policy")
    if info is None:
        raise DomainError("problem was not built with a policy structure")
    if solution.status is not LpStatus.OPTIMAL:
        raise DomainError(f"cannot extract from a {solution.status.value} solution")
    kind = info["kind"]
    if kind == "free":
        raise ConfigError(
            "scenario-free windows have no shared first step to apply")
    if kind == "constant":
        return ConstantPolicy(float(solution.value(problem, "grid[0,1]")))
    slope_var = "a[0]" if kind == "affine" else "A[0,0]"
    return SaturatedAffinePolicy(
        a=float(solution.value(problem, slope_var)),
        b=float(solution.value(problem, "b[0]")),
        lo=float(info["lo0"]),
        hi=float(info["hi0"]),
    )


def evaluate_policy(policy, realization: float) -> float:
    """Grid purchase the policy prescribes for a realized net demand."""
    r = float(realization)
    if not math.isfinite(r):
        raise DomainError(f"realization {realization!r} is not finite")
    return policy.evaluate(r)


def repair_feasibility(p_grid: float, realization: float,
                       battery: BatteryParams, e_t: float,
                       pv_available: float, step_hours: float = 1.0) -> Dispatch:
    """Turn a prescribed grid purchase into a feasible dispatch.

    The difference between p_grid and the realized net demand is assigned to
    charging or discharging. Charging beyond the battery's power or energy
    headroom is first absorbed by curtailing PV, then by lowering the grid
    purchase; a discharge shortfall is covered by buying more. Returns the
    dispatch actually applied, with p_grid adjusted accordingly.
    """
    if not all(math.isfinite(float(v)) for v in
               (p_grid, realization, e_t, pv_available)):
        raise DomainError("grid setpoint, realization, stored energy and "
                          "available PV must all be finite")
    if pv_available < 0.0:
        raise DomainError("available PV power must be nonnegative")
    if step_hours <= 0.0:
        raise DomainError(f"step length {step_hours!r} must be positive")
    p_grid = max(0.0, float(p_grid))
    r = float(realization)

    diff = p_grid - r
    if diff >= 0.0:
        cap = min(battery.p_c_max,
                  max(0.0, battery.e_max - e_t) / (battery.m_c * step_hours))
        p_c = min(diff, cap)
        curtail = min(diff - p_c, float(pv_available))
        # leftover excess lowers the purchase below the policy value
        grid_out = max(0.0, p_grid - (diff - p_c - curtail))
        return Dispatch(p_grid=grid_out, p_c=p_c, p_dc=0.0, curtail=curtail)

    need = -diff
    cap = min(battery.p_dc_max, max(0.0, e_t) * battery.m_dc / step_hours)
    p_dc = min(need, cap)
    # any shortfall raises the purchase above the policy value
    grid_out = p_grid + (need - p_dc)
    return Dispatch(p_grid=grid_out, p_c=0.0, p_dc=p_dc, curtail=0.0)


def advance_state(state: MpcState, step: Dispatch, calendar: PeakCalendar,
                  battery: BatteryParams, step_hours: float = 1.0) -> MpcState:
    """State after applying one dispatch: next step, energy, running peak.

    The running peak resets to zero when the next step opens a new billing
    period, otherwise it absorbs the applied grid purchase.
    """
    e_next = state.e0 + storage_delta(step.p_c, step.p_dc, battery, step_hours)
    e_next = min(max(e_next, 0.0), battery.e_max)
    t_next = state.t + 1
    if calendar.period_of(t_next) != calendar.period_of(state.t):
        s_next = 0.0
    else:
        s_next = max(state.s_init, step.p_grid)
    return MpcState(t=t_next, e0=e_next, s_init=s_next)
