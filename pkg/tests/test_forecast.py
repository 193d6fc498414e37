"""PVUSA fit/predict, day classification, error filter, MLP, refit registry."""
import json
from datetime import datetime, timezone

import numpy as np
import pytest

from peakshaver.core import TimeGrid
from peakshaver.errors import ClassificationError, DomainError, FitError
from peakshaver.forecast import (
    DayClass,
    FilterState,
    ModelRegistry,
    MlpModel,
    PvHistory,
    PvusaCoefficients,
    WeatherScenario,
    apply_error_filter,
    classify_day,
    fit_pvusa,
    init_mlp,
    loss_and_grads,
    predict_mlp,
    predict_pvusa,
    refit_models,
    train_mlp,
)
from peakshaver.forecast.registry import ISSUE_MIDNIGHT, ISSUE_NOON

UTC = timezone.utc


def _scenario(irr, temp):
    return WeatherScenario(np.asarray(irr, float), np.asarray(temp, float),
                           issue_time=datetime(2024, 1, 1, tzinfo=UTC))


def test_fit_recovers_exact_coefficients():
    rng = np.random.default_rng(0)
    gamma = np.array([0.05, -1e-5, 1e-4])
    irr = rng.uniform(50.0, 900.0, 20)
    temp = rng.uniform(-5.0, 30.0, 20)
    design = np.column_stack([irr, irr**2, irr * temp])
    power = design @ gamma
    got = fit_pvusa(np.column_stack([irr, temp, power]))
    assert np.allclose(got.as_tuple(), gamma, atol=1e-8, rtol=0.0)
    # independent oracle: solve the 3x3 normal equations directly
    oracle = np.linalg.solve(design.T @ design, design.T @ power)
    assert np.allclose(got.as_tuple(), oracle, atol=1e-8, rtol=0.0)


def test_fit_zero_targets_give_zero_coefficients():
    rng = np.random.default_rng(1)
    irr = rng.uniform(100.0, 800.0, 12)
    temp = rng.uniform(0.0, 25.0, 12)
    got = fit_pvusa(np.column_stack([irr, temp, np.zeros(12)]))
    assert np.allclose(got.as_tuple(), (0.0, 0.0, 0.0), atol=1e-12)


def test_fit_least_squares_beats_perturbed_triples():
    rng = np.random.default_rng(2)
    irr = rng.uniform(50.0, 900.0, 40)
    temp = rng.uniform(-5.0, 30.0, 40)
    design = np.column_stack([irr, irr**2, irr * temp])
    power = design @ np.array([0.04, -8e-6, 2e-4]) + rng.normal(0.0, 0.5, 40)
    fit = np.array(fit_pvusa(np.column_stack([irr, temp, power])).as_tuple())
    best = np.linalg.norm(design @ fit - power)
    for _ in range(100):
        rival = fit * (1.0 + rng.uniform(-0.1, 0.1, 3)) + rng.normal(0, 1e-6, 3)
        assert np.linalg.norm(design @ rival - power) >= best - 1e-9


def test_fit_degenerate_designs_raise():
    with pytest.raises(FitError, match="irradiance"):
        fit_pvusa([(0.0, 10.0, 0.0), (0.0, 12.0, 0.0), (0.0, 15.0, 0.0)])
    # constant temperature makes I*T proportional to I
    with pytest.raises(FitError):
        fit_pvusa([(100.0, 20.0, 5.0), (200.0, 20.0, 9.0),
                   (300.0, 20.0, 14.0), (400.0, 20.0, 18.0)])
    with pytest.raises(FitError):
        fit_pvusa([(100.0, 20.0, 5.0), (200.0, 21.0, 9.0)])
    with pytest.raises(FitError):
        fit_pvusa([(100.0, 20.0, np.nan)] * 5)


def test_predict_examples_and_clamp():
    out = predict_pvusa(PvusaCoefficients(0.1, 0.0, 0.0),
                        _scenario([100.0], [20.0]))
    assert out == pytest.approx([10.0])
    out = predict_pvusa(PvusaCoefficients(0.05, -1e-5, 1e-4),
                        _scenario([200.0], [25.0]))
    assert out == pytest.approx([10.1])
    out = predict_pvusa(PvusaCoefficients(0.05, -1e-3, 0.0),
                        _scenario([100.0], [20.0]))
    assert out == pytest.approx([0.0])


def test_weather_scenario_validation():
    with pytest.raises(DomainError):
        _scenario([-1.0], [20.0])
    with pytest.raises(DomainError):
        _scenario([100.0, 200.0], [20.0])


def test_classify_day_regimes_and_ties():
    cs = 900.0 * np.sin(np.pi * np.maximum(np.arange(24.0) - 6, 0.0) / 12.0)
    cs[np.arange(24) > 18] = 0.0
    assert classify_day(cs, cs) is DayClass.CLEAR
    assert classify_day(0.3 * cs, cs) is DayClass.CLOUDY
    assert classify_day(0.8 * cs, cs) is DayClass.CLEAR  # tie goes to Clear
    # scale invariance
    for c in (0.01, 3.7):
        assert classify_day(0.5 * cs * c, cs * c) is DayClass.CLOUDY
        assert classify_day(0.9 * cs * c, cs * c) is DayClass.CLEAR
    with pytest.raises(ClassificationError):
        classify_day(np.zeros(24), np.zeros(24))
    with pytest.raises(DomainError):
        classify_day(cs[:12], cs)


def test_error_filter_decay_and_identity():
    state = FilterState(alpha=0.5, last_error=2.0)
    out = apply_error_filter([10.0, 10.0, 10.0], state)
    assert out == pytest.approx([9.0, 9.5, 9.75])
    f = np.array([4.0, 7.0, 1.0])
    assert np.array_equal(apply_error_filter(f, FilterState(0.0, 99.0)), f)
    assert np.array_equal(apply_error_filter(f, FilterState(0.5, 0.0)), f)
    assert FilterState(0.5).observed(12.0, 9.5).last_error == 2.5
    with pytest.raises(DomainError):
        FilterState(alpha=1.5)
    with pytest.raises(DomainError):
        apply_error_filter([], FilterState(0.5))


def test_filter_lowers_rmse_on_ar1_errors():
    rng = np.random.default_rng(7)
    n = 5000
    w = rng.standard_normal(n)
    e = np.empty(n)
    e[0] = w[0]
    for i in range(1, n):
        e[i] = 0.5 * e[i - 1] + w[i]
    raw = np.sqrt(np.mean(e[1:] ** 2))
    corrected = np.sqrt(np.mean((e[1:] - 0.5 * e[:-1]) ** 2))
    assert corrected < raw * 0.95


def test_predict_mlp_affine_collapse_and_identity():
    m = MlpModel((np.zeros((3, 4)), np.zeros((4, 2))),
                 (np.zeros(4), np.array([1.5, -2.0])), (0.0,))
    assert np.array_equal(predict_mlp(m, np.ones(3)), [1.5, -2.0])
    ident = MlpModel((np.eye(4),), (np.zeros(4),), ())
    x = np.array([0.3, -1.2, 4.0, 0.0])
    assert np.array_equal(predict_mlp(ident, x), x)
    # batch form and determinism
    batch = np.tile(x, (5, 1))
    assert np.array_equal(predict_mlp(ident, batch), batch)
    m2 = init_mlp((6, 9, 4), seed=3)
    x2 = np.linspace(-1.0, 1.0, 6)
    assert np.array_equal(predict_mlp(m2, x2), predict_mlp(m2, x2))
    with pytest.raises(DomainError):
        predict_mlp(ident, np.ones(5))
    with pytest.raises(DomainError):
        MlpModel((np.zeros((3, 4)), np.zeros((5, 2))), (np.zeros(4), np.zeros(2)),
                 (0.0,))


def test_mlp_gradients_match_central_differences():
    rng = np.random.default_rng(11)
    worst = 0.0
    for point in range(10):
        model = init_mlp((48, 8, 24), seed=100 + point)
        x = rng.standard_normal((1, 48))
        y = rng.standard_normal((1, 24))
        _, gw, gb = loss_and_grads(model, x, y)
        weights = [w.copy() for w in model.weights]
        biases = [b.copy() for b in model.biases]
        for li, grad in enumerate(gw):
            flat = weights[li].reshape(-1)
            gflat = grad.reshape(-1)
            for k in range(flat.size):
                h = 1e-5 * max(1.0, abs(flat[k]))
                orig = flat[k]
                flat[k] = orig + h
                lo_p, *_ = loss_and_grads(
                    MlpModel(tuple(weights), tuple(biases), model.dropout), x, y)
                flat[k] = orig - h
                lo_m, *_ = loss_and_grads(
                    MlpModel(tuple(weights), tuple(biases), model.dropout), x, y)
                flat[k] = orig
                fd = (lo_p - lo_m) / (2.0 * h)
                rel = abs(fd - gflat[k]) / max(abs(fd) + abs(gflat[k]), 1e-6)
                worst = max(worst, rel)
    assert worst < 1e-4


def test_train_mlp_fits_linear_target():
    x = np.linspace(0.0, 1.0, 25)[:, None]
    y = 2.0 * x
    model = init_mlp((1, 1, 1), seed=1)
    trained, trace = train_mlp(model, x, y, epochs=500, learning_rate=0.01, seed=1)
    final_mse = float(np.mean((predict_mlp(trained, x) - y) ** 2))
    # closed-form linear regression is the floor this must approach
    a = np.column_stack([x[:, 0], np.ones(len(x))])
    coef, *_ = np.linalg.lstsq(a, y[:, 0], rcond=None)
    floor = float(np.mean((a @ coef - y[:, 0]) ** 2))
    assert final_mse < max(1e-3, 10.0 * floor)
    assert final_mse >= floor - 1e-12
    # averaged over 50-epoch windows the trace keeps descending
    means = np.convolve(trace, np.ones(50) / 50.0, mode="valid")
    assert np.all(np.diff(means) <= 1e-9)
    assert len(trace) == 500


def test_train_mlp_zero_epochs_and_zero_targets():
    x = np.random.default_rng(0).uniform(0.0, 1.0, (30, 4))
    model = init_mlp((4, 6, 2), seed=5)
    same, trace = train_mlp(model, x, np.ones((30, 2)), epochs=0)
    assert trace == [] and same is model
    trained, _ = train_mlp(model, x, np.zeros((30, 2)), epochs=500)
    assert np.mean(np.abs(predict_mlp(trained, x))) < 0.05
    with pytest.raises(DomainError):
        train_mlp(model, x, np.zeros((29, 2)), epochs=1)


def test_train_mlp_dropout_draws_are_seeded():
    rng = np.random.default_rng(13)
    x = rng.uniform(0.0, 1.0, (40, 48))
    y = rng.uniform(0.0, 1.0, (40, 24))
    model = init_mlp((48, 96, 24), (0.25,), seed=2)
    t1, trace1 = train_mlp(model, x, y, epochs=8, seed=9)
    t2, trace2 = train_mlp(model, x, y, epochs=8, seed=9)
    assert trace1 == trace2
    assert all(np.array_equal(a, b) for a, b in zip(t1.weights, t2.weights))
    _, trace3 = train_mlp(model, x, y, epochs=8, seed=10)
    assert trace1 != trace3


def _clear_history(days, start="2024-01-01T00:00:00Z"):
    n = days * 24
    grid = TimeGrid.from_iso(start, n)
    hours = np.arange(n) % 24
    shape = np.where((hours >= 6) & (hours <= 18),
                     np.sin(np.pi * (hours - 6) / 12.0), 0.0)
    clearsky = 1000.0 * np.maximum(shape, 0.0)
    irr = clearsky.copy()
    # temperature must not be affine in irradiance or the design degenerates
    temp = 10.0 + 8.0 * np.maximum(shape, 0.0) + 3.0 * np.cos(
        2.0 * np.pi * (hours - 15.0) / 24.0)
    power = irr * (0.05 + -1e-5 * irr + 1e-4 * temp)
    return PvHistory(grid, irr, temp, np.maximum(power, 0.0), clearsky)


def test_refit_matches_direct_fit_on_the_window():
    hist = _clear_history(11)
    now = datetime(2024, 1, 11, 0, 0, tzinfo=UTC)
    reg = refit_models(ModelRegistry(), hist, now, window_days=10)
    entry = reg.lookup(ISSUE_MIDNIGHT, DayClass.CLEAR)
    window = slice(0, 240)
    direct = fit_pvusa(np.column_stack([hist.irradiance[window],
                                        hist.temperature[window],
                                        hist.power[window]]))
    assert entry.coeffs == direct
    assert entry.n_samples == 240
    # noon-aligned window reaches 12 hours further back than exists
    assert any(ISSUE_NOON in w for w in reg.warnings)
    # all days were clear, so no cloudy model could be fit
    with pytest.raises(DomainError):
        reg.lookup(ISSUE_MIDNIGHT, DayClass.CLOUDY)


def test_refit_schedule_gate_and_short_history():
    hist = _clear_history(11)
    reg = ModelRegistry()
    # 13:00 is not an issue time
    same = refit_models(reg, hist, datetime(2024, 1, 11, 13, 0, tzinfo=UTC))
    assert same is reg
    short = _clear_history(3)
    out = refit_models(reg, short, datetime(2024, 1, 4, 0, 0, tzinfo=UTC))
    assert out.entries == {}
    assert len(out.warnings) == 2
    with pytest.raises(DomainError):
        refit_models(reg, hist, datetime(2024, 1, 11, 0, 0))


def test_refit_covers_all_four_slots_with_enough_history():
    hist = _clear_history(12)
    now = datetime(2024, 1, 12, 12, 0, tzinfo=UTC)
    reg = refit_models(ModelRegistry(), hist, now, window_days=10)
    for issue in (ISSUE_MIDNIGHT, ISSUE_NOON):
        entry = reg.lookup(issue, DayClass.CLEAR)
        assert entry.n_samples == 240
    # the two issue times fit on differently aligned windows
    mid = reg.lookup(ISSUE_MIDNIGHT, DayClass.CLEAR)
    noon = reg.lookup(ISSUE_NOON, DayClass.CLEAR)
    assert mid.fitted_at == noon.fitted_at == now


def test_registry_json_round_trip():
    hist = _clear_history(11)
    now = datetime(2024, 1, 11, 0, 0, tzinfo=UTC)
    reg = refit_models(ModelRegistry(), hist, now, window_days=10)
    doc = json.loads(json.dumps(reg.to_json_dict()))
    back = ModelRegistry.from_json_dict(doc)
    assert back.entries == reg.entries
    assert back.warnings == reg.warnings
