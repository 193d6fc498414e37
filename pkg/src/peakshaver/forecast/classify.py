"""Daily clear/cloudy classification by clear-sky index.

A day is Clear when its mean irradiance over the daylight hours reaches the
given fraction of the clear-sky mean. This stands in for a full clear-sky
detection algorithm: only the two-regime split and the interface matter to
the rest of the pipeline.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from ..errors import ClassificationError, DomainError

DEFAULT_THRESHOLD = 0.8


class DayClass(Enum):
    CLEAR = "Clear"
    CLOUDY = "Cloudy"


def classify_day(day_irradiance, clearsky,
                 threshold: float = DEFAULT_THRESHOLD) -> DayClass:
    """Classify one day of irradiance against its clear-sky curve.

    Ties go to Clear. The index is a ratio of means, so scaling both inputs
    by the same positive factor cannot change the class.
    """
    irr = np.asarray(day_irradiance, dtype=float)
    cs = np.asarray(clearsky, dtype=float)
    if irr.shape != cs.shape or irr.ndim != 1 or len(irr) == 0:
        raise DomainError("day_irradiance and clearsky must be equal-length"
                          " 1-D sequences")
    if not (np.all(np.isfinite(irr)) and np.all(np.isfinite(cs))):
        raise DomainError("classification inputs contain non-finite values")
    daylight = cs > 0.0
    if not daylight.any():
        raise ClassificationError("clear-sky curve has no daylight hours")
    index = irr[daylight].mean() / cs[daylight].mean()
    return DayClass.CLEAR if index >= threshold else DayClass.CLOUDY
