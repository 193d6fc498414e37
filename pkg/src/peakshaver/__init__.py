"""Battery peak shaving behind a demand-charge tariff.

Forecast models, receding-horizon dispatch built on linear programs, a
built-in simplex solver, and a closed-loop simulator with reference
baselines.
"""
__version__ = "0.1.0"

from .core import (
    BatteryParams,
    ExogenousData,
    PeakCalendar,
    ScenarioEnsemble,
    Tariff,
    TimeGrid,
    storage_delta,
    terminal_price,
)
from .errors import (
    ClassificationError,
    ConfigError,
    DomainError,
    FitError,
    LpError,
    PeakShaverError,
    SchemaError,
)

__all__ = [
    "BatteryParams",
    "ExogenousData",
    "PeakCalendar",
    "ScenarioEnsemble",
    "Tariff",
    "TimeGrid",
    "storage_delta",
    "terminal_price",
    "ClassificationError",
    "ConfigError",
    "DomainError",
    "FitError",
    "LpError",
    "PeakShaverError",
    "SchemaError",
    "__version__",
]
