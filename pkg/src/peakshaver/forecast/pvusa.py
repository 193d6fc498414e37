"""PVUSA regression: plant power as a function of irradiance and temperature.

The model is P = g1*I + g2*I^2 + g3*I*T, linear in the coefficients, so the
fit is an ordinary least-squares problem on the regressors (I, I^2, I*T).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from ..errors import DomainError, FitError

_COLUMN_NAMES = ("irradiance", "irradiance^2", "irradiance*temperature")


@dataclass(frozen=True)
class PvusaCoefficients:
    gamma1: float
    gamma2: float
    gamma3: float

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "gamma3"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    def as_tuple(self):
        return (self.gamma1, self.gamma2, self.gamma3)


@dataclass(frozen=True)
class WeatherScenario:
    """One forecast member: irradiance and temperature over a window."""

    irradiance: np.ndarray
    temperature: np.ndarray
    issue_time: datetime
    scenario_id: int = 1

    def __post_init__(self):
        irr = np.asarray(self.irradiance, dtype=float)
        temp = np.asarray(self.temperature, dtype=float)
        object.__setattr__(self, "irradiance", irr)
        object.__setattr__(self, "temperature", temp)
        if irr.ndim != 1 or temp.ndim != 1 or len(irr) != len(temp):
            raise DomainError("irradiance and temperature must be equal-length"
                              " 1-D sequences")
        if not (np.all(np.isfinite(irr)) and np.all(np.isfinite(temp))):
            raise DomainError("weather scenario contains non-finite values")
        if np.any(irr < 0):
            raise DomainError("irradiance must be >= 0")
        if self.scenario_id < 1:
            raise DomainError(f"scenario_id must be >= 1, got {self.scenario_id}")


def _design(irr: np.ndarray, temp: np.ndarray) -> np.ndarray:
    return np.column_stack([irr, irr * irr, irr * temp])


def fit_pvusa(samples) -> PvusaCoefficients:
    """Least-squares coefficients from (irradiance, temperature, power) triples."""
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DomainError("samples must be (irradiance, temperature, power) triples")
    if arr.shape[0] < 3:
        raise FitError(f"need at least 3 samples, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise FitError("samples contain non-finite values")
    x = _design(arr[:, 0], arr[:, 1])
    norms = np.linalg.norm(x, axis=0)
    for name, norm in zip(_COLUMN_NAMES, norms):
        if norm == 0.0:
            raise FitError(f"design column {name} is identically zero")
    # scale columns to unit norm so the rank test is meaningful across the
    # wildly different magnitudes of I, I^2 and I*T
    scaled = x / norms
    _, s, vt = np.linalg.svd(scaled, full_matrices=False)
    if s[-1] <= 1e-10 * s[0]:
        culprit = _COLUMN_NAMES[int(np.argmax(np.abs(vt[-1])))]
        raise FitError(f"design is rank-deficient; column {culprit} is "
                       "linearly dependent on the others")
    coef, *_ = np.linalg.lstsq(scaled, arr[:, 2], rcond=None)
    g = coef / norms
    return PvusaCoefficients(float(g[0]), float(g[1]), float(g[2]))


def predict_pvusa(coeffs: PvusaCoefficients, scenario: WeatherScenario) -> np.ndarray:
    """Forecast plant power for a weather scenario, clamped at zero."""
    raw = _design(scenario.irradiance, scenario.temperature) @ np.array(
        coeffs.as_tuple())
    return np.maximum(raw, 0.0)
