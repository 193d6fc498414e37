"""Forecast models: PVUSA regression, day classification, error filtering,
small neural networks, and the scheduled refit registry."""
from .classify import DEFAULT_THRESHOLD, DayClass, classify_day
from .filter import FilterState, apply_error_filter
from .mlp import (
    MlpModel,
    demand_day_ahead_model,
    demand_multi_day_model,
    init_mlp,
    loss_and_grads,
    predict_mlp,
    pv_day_ahead_model,
    train_mlp,
)
from .pvusa import PvusaCoefficients, WeatherScenario, fit_pvusa, predict_pvusa
from .registry import (
    ISSUE_MIDNIGHT,
    ISSUE_NOON,
    ModelRegistry,
    PvHistory,
    RegistryEntry,
    refit_models,
)

__all__ = [
    "DEFAULT_THRESHOLD",
    "DayClass",
    "FilterState",
    "ISSUE_MIDNIGHT",
    "ISSUE_NOON",
    "MlpModel",
    "ModelRegistry",
    "PvHistory",
    "PvusaCoefficients",
    "RegistryEntry",
    "WeatherScenario",
    "apply_error_filter",
    "classify_day",
    "demand_day_ahead_model",
    "demand_multi_day_model",
    "fit_pvusa",
    "init_mlp",
    "loss_and_grads",
    "predict_mlp",
    "predict_pvusa",
    "pv_day_ahead_model",
    "refit_models",
    "train_mlp",
]
