"""First-order correction of forecast windows from the last observed error.

With prediction error e_n = f_n - r_n, the realization of step n is not
known when step n's decision is made, so the correction decays the last
observed error: f*_{n+i} = f_{n+i} - alpha^{i+1} * e_{n-1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class FilterState:
    alpha: float
    last_error: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not math.isfinite(self.last_error):
            raise DomainError("last_error must be finite")

    def observed(self, forecast: float, realized: float) -> "FilterState":
        """State after observing one realization of a forecast step."""
        return replace(self, last_error=float(forecast) - float(realized))


def apply_error_filter(forecast, state: FilterState) -> np.ndarray:
    """Corrected forecast window under the decayed-error rule."""
    f = np.asarray(forecast, dtype=float)
    if f.ndim != 1 or len(f) == 0:
        raise DomainError("forecast must be a nonempty 1-D sequence")
    decay = state.alpha ** np.arange(1, len(f) + 1)
    return f - decay * state.last_error
