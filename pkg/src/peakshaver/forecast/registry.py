"""Issue-time x day-class model registry with a scheduled online refit.

Forecasts are issued twice a day (midnight and noon). Each issue time keeps
separate clear-day and cloudy-day PVUSA models, fit over trailing 24-step
blocks aligned to that issue time. A refit that cannot proceed (not enough
history, degenerate fit, no days of a class in the window) leaves the
previous model in place and appends a warning record instead of raising.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from ..core import TimeGrid, format_timestamp, parse_timestamp
from ..errors import DomainError, FitError
from .classify import DEFAULT_THRESHOLD, DayClass, classify_day
from .pvusa import PvusaCoefficients, fit_pvusa

ISSUE_MIDNIGHT = "midnight"
ISSUE_NOON = "noon"
_ISSUE_HOURS = {0: ISSUE_MIDNIGHT, 12: ISSUE_NOON}


@dataclass(frozen=True)
class PvHistory:
    """Realized weather and plant output backing the refits."""

    grid: TimeGrid
    irradiance: np.ndarray
    temperature: np.ndarray
    power: np.ndarray
    clearsky: np.ndarray

    def __post_init__(self):
        for name in ("irradiance", "temperature", "power", "clearsky"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.ndim != 1 or len(arr) != self.grid.steps:
                raise DomainError(
                    f"{name} must be 1-D with {self.grid.steps} entries")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class RegistryEntry:
    coeffs: PvusaCoefficients
    fitted_at: datetime
    window_days: int
    n_samples: int


@dataclass(frozen=True)
class ModelRegistry:
    entries: dict = field(default_factory=dict)
    warnings: tuple = ()

    def lookup(self, issue_time: str, day_class: DayClass) -> RegistryEntry:
        key = (issue_time, day_class)
        if key not in self.entries:
            raise DomainError(
                f"no model for issue time {issue_time!r}, class "
                f"{day_class.value}; run a refit first")
        return self.entries[key]

    def to_json_dict(self) -> dict:
        records = []
        for (issue, cls), entry in sorted(
                self.entries.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
            records.append({
                "issue_time": issue,
                "day_class": cls.value,
                "gamma": list(entry.coeffs.as_tuple()),
                "fitted_at": format_timestamp(entry.fitted_at),
                "window_days": entry.window_days,
                "n_samples": entry.n_samples,
            })
        return {"models": records, "warnings": list(self.warnings)}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ModelRegistry":
        entries = {}
        for rec in doc.get("models", []):
            g = rec["gamma"]
            entries[(rec["issue_time"], DayClass(rec["day_class"]))] = RegistryEntry(
                coeffs=PvusaCoefficients(float(g[0]), float(g[1]), float(g[2])),
                fitted_at=parse_timestamp(rec["fitted_at"]),
                window_days=int(rec["window_days"]),
                n_samples=int(rec["n_samples"]),
            )
        return cls(entries=entries, warnings=tuple(doc.get("warnings", ())))


def _issue_anchor(now: datetime, issue: str, grid: TimeGrid) -> int:
    """Most recent step index at the issue's hour, at or before now."""
    hour = 0 if issue == ISSUE_MIDNIGHT else 12
    anchor = now.replace(hour=hour)
    if anchor > now:
        anchor -= timedelta(days=1)
    offset_h = (anchor - grid.timestamp(0)).total_seconds() / 3600.0
    steps = offset_h / grid.step_hours
    if steps != int(steps):
        raise DomainError("issue time does not fall on a history step")
    return int(steps)


def refit_models(registry: ModelRegistry, history: PvHistory, now: datetime,
                 window_days: int = 10,
                 threshold: float = DEFAULT_THRESHOLD) -> ModelRegistry:
    """Refit all four (issue time x day class) models at an issue time.

    Called at any other wall-clock time, this is a no-op. Each issue time's
    window is the trailing window_days 24-hour blocks ending at that issue
    hour, classified block by block against the clear-sky curve.
    """
    if now.tzinfo is None or now.utcoffset() != timedelta(0):
        raise DomainError("now must be timezone-aware UTC")
    if window_days < 1:
        raise DomainError(f"window_days must be >= 1, got {window_days}")
    if now.minute or now.second or now.microsecond or now.hour not in _ISSUE_HOURS:
        return registry

    steps_per_day = 24.0 / history.grid.step_hours
    if steps_per_day != int(steps_per_day):
        raise DomainError("history step length must divide 24 hours")
    steps_per_day = int(steps_per_day)
    need = window_days * steps_per_day

    entries = dict(registry.entries)
    warnings = list(registry.warnings)
    stamp = format_timestamp(now)

    for issue in (ISSUE_MIDNIGHT, ISSUE_NOON):
        end = _issue_anchor(now, issue, history.grid)
        if end < need or end > history.grid.steps:
            warnings.append(
                f"{stamp} {issue}: history covers {max(end, 0)} steps before "
                f"the issue hour, need {need}; models retained")
            continue
        blocks = {DayClass.CLEAR: [], DayClass.CLOUDY: []}
        for d in range(window_days):
            lo = end - need + d * steps_per_day
            hi = lo + steps_per_day
            cls = classify_day(history.irradiance[lo:hi],
                               history.clearsky[lo:hi], threshold)
            blocks[cls].append((lo, hi))
        for cls, spans in blocks.items():
            if not spans:
                warnings.append(
                    f"{stamp} {issue}: no {cls.value.lower()} days in the "
                    f"window; model retained")
                continue
            idx = np.concatenate([np.arange(lo, hi) for lo, hi in spans])
            samples = np.column_stack([history.irradiance[idx],
                                       history.temperature[idx],
                                       history.power[idx]])
            try:
                coeffs = fit_pvusa(samples)
            except FitError as exc:
                warnings.append(f"{stamp} {issue}/{cls.value}: {exc}; "
                                "model retained")
                continue
            entries[(issue, cls)] = RegistryEntry(
                coeffs=coeffs, fitted_at=now, window_days=window_days,
                n_samples=len(idx))

    return replace(registry, entries=entries, warnings=tuple(warnings))
