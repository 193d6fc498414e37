"""Command-line entry point.

Subcommands: synth (write a seeded synthetic dataset), simulate (one
closed-loop run), sweep (one run per value of a swept parameter), oracle
(LP against the brute-force DP on a tiny instance), fit-pv (regression
coefficients from weather plus production), classify (clear/cloudy day
labels). simulate and sweep read a flat `key = value` config; every file
they write is listed, with digests, in a run manifest so a run can be
checked and re-executed bit-identically. PEAKSHAVER_SEED overrides the
configured seed. Failures print one JSON line to stderr and exit 2.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .core import (
    BatteryParams,
    ExogenousData,
    PeakCalendar,
    ScenarioEnsemble,
    Tariff,
    TimeGrid,
)
from .errors import ConfigError, PeakShaverError
from .forecast import WeatherScenario, classify_day, fit_pvusa
from .io import (
    RunManifest,
    export_scenario_csv,
    export_site_csv,
    export_weather_csv,
    ingest_csv,
    read_config,
    sha256_file,
    write_cost_report_json,
    write_run_manifest,
    write_sweep_csv,
    write_trajectory_csv,
)
from .lp import solve
from .problems import (
    IntraPeakWeighting,
    PeakStrategy,
    PolicyStructure,
    build_full_horizon,
)
from .simulator import (
    PerfectForecast,
    SimConfig,
    SimMode,
    StaticEnsembleSource,
    run_closed_loop,
    run_sweep,
)
from .synth import SynthSpec, dp_oracle, generate

_SIM_KEYS = ("mode", "horizon_m", "strategy", "structure", "m2", "theta",
             "m1", "weighting_on", "filter_alpha", "refit", "seed",
             "err_rmse")
_WORLD_KEYS = ("days", "pv_peak_kw", "demand_base_kw", "demand_peak_kw",
               "weekend_factor", "noise_sd", "scenario_spread_sd")
_RUN_KEYS = ("day_rate", "night_rate", "peak_price", "period_hours",
             "e_max", "p_c_max", "p_dc_max", "m_c", "m_dc", "e0",
             "site", "scenarios")
_SWEEP_KEYS = ("sweep_param", "sweep_values")
_ORACLE_KEYS = ("steps", "grid_levels", "energy_levels")
_ALL_KEYS = _SIM_KEYS + _WORLD_KEYS + _RUN_KEYS + _SWEEP_KEYS + _ORACLE_KEYS

_STRUCTURES = {
    "free": PolicyStructure.scenario_free,
    "scenariofree": PolicyStructure.scenario_free,
    "constant": PolicyStructure.constant_first_step,
    "constantfirststep": PolicyStructure.constant_first_step,
    "affine": PolicyStructure.affine_first_step,
    "affinefirststep": PolicyStructure.affine_first_step,
}


def _load_config(path: str) -> dict:
    cfg = read_config(path)
    unknown = sorted(set(cfg) - set(_ALL_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; valid keys are "
                          f"{sorted(_ALL_KEYS)}")
    return cfg


def _get(cfg, key, default, convert):
    if key not in cfg:
        return default
    text = cfg[key]
    try:
        return convert(text)
    except PeakShaverError:
        raise
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key} has bad value {text!r}")


def _bool(text: str) -> bool:
    key = text.strip().lower()
    if key in ("true", "yes", "on", "1"):
        return True
    if key in ("false", "no", "off", "0"):
        return False
    raise ValueError(text)


def _seed(cfg) -> int:
    env = os.environ.get("PEAKSHAVER_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"PEAKSHAVER_SEED must be an integer, "
                              f"got {env!r}")
    return _get(cfg, "seed", 0, int)


def _structure(cfg) -> PolicyStructure:
    kind = cfg.get("structure", "constant").strip().lower()
    if kind in ("banded", "bandedcausal"):
        return PolicyStructure.banded_causal(_get(cfg, "m2", 0, int))
    if kind not in _STRUCTURES:
        raise ConfigError(f"unknown policy structure {cfg['structure']!r}")
    if "m2" in cfg:
        raise ConfigError("m2 only applies to the banded structure")
    return _STRUCTURES[kind]()


def _sim_config(cfg) -> SimConfig:
    if "mode" not in cfg:
        raise ConfigError("config must set mode")
    mode = SimMode.parse(cfg["mode"])
    sweeping = cfg.get("sweep_param") in ("mode", "structure")
    if mode is not SimMode.STOCH_MPC and not sweeping:
        for key in ("structure", "m2", "err_rmse"):
            if key in cfg:
                raise ConfigError(f"config key {key} only applies to "
                                  "mode = StochMpc")
    theta = _get(cfg, "theta", 0.0, float)
    m1 = _get(cfg, "m1", 0, int)
    return SimConfig(
        mode=mode,
        horizon_m=_get(cfg, "horizon_m", 24, int),
        strategy=_get(cfg, "strategy", PeakStrategy.FULL_FULL,
                      PeakStrategy.parse),
        intra=IntraPeakWeighting(theta, m1),
        structure=_structure(cfg),
        weighting_on=_get(cfg, "weighting_on", True, _bool),
        filter_alpha=_get(cfg, "filter_alpha", 0.0, float),
        refit=_get(cfg, "refit", False, _bool),
        seed=_seed(cfg),
        err_rmse=_get(cfg, "err_rmse", 0.0, float),
    )


def _synth_spec(cfg) -> SynthSpec:
    return SynthSpec(
        days=_get(cfg, "days", 7, int),
        pv_peak_kw=_get(cfg, "pv_peak_kw", 40.0, float),
        demand_base_kw=_get(cfg, "demand_base_kw", 20.0, float),
        demand_peak_kw=_get(cfg, "demand_peak_kw", 55.0, float),
        weekend_factor=_get(cfg, "weekend_factor", 0.35, float),
        noise_sd=_get(cfg, "noise_sd", 1.5, float),
        scenario_spread_sd=_get(cfg, "scenario_spread_sd", 0.6, float),
        seed=_seed(cfg),
    )


def _battery(cfg) -> BatteryParams:
    return BatteryParams(
        e_max=_get(cfg, "e_max", 30.0, float),
        p_c_max=_get(cfg, "p_c_max", 10.0, float),
        p_dc_max=_get(cfg, "p_dc_max", 10.0, float),
        m_c=_get(cfg, "m_c", 0.92, float),
        m_dc=_get(cfg, "m_dc", 0.92, float),
    )


def _world(cfg, inputs):
    """Truth, forecast source, grid and calendar from config or data files.

    inputs collects ingested file paths for the manifest. A site file takes
    precedence over synthetic keys; a scenario file turns into a static
    ensemble source, otherwise forecasts are the truth itself.
    """
    if "site" in cfg:
        site = cfg["site"]
        inputs.append(site)
        grid, truth = ingest_csv(site)
        if not isinstance(truth, ExogenousData):
            raise ConfigError(f"{site} is not a timestamp,demand_kw,pv_kw "
                              "file")
        if "scenarios" in cfg:
            inputs.append(cfg["scenarios"])
            sgrid, ens = ingest_csv(cfg["scenarios"])
            if not isinstance(ens, ScenarioEnsemble):
                raise ConfigError(f"{cfg['scenarios']} is not a scenario "
                                  "matrix file")
            if sgrid != grid:
                raise ConfigError("scenario file covers different "
                                  "timestamps than the site file")
            source = StaticEnsembleSource(ens.nets)
        else:
            source = PerfectForecast(truth)
    else:
        if "scenarios" in cfg:
            raise ConfigError("a scenario file needs a site file")
        truth, source, weather = generate(_synth_spec(cfg))
        grid = weather.grid

    n = truth.n_steps
    period_hours = _get(cfg, "period_hours", 48.0, float)
    period_steps = period_hours / grid.step_hours
    if abs(period_steps - round(period_steps)) > 1e-9 or period_steps < 1:
        raise ConfigError(f"period_hours {period_hours} is not a whole "
                          "number of steps")
    calendar = PeakCalendar.uniform(n, min(n, int(round(period_steps))),
                                    grid.step_hours)
    tariff = Tariff.day_night(grid, _get(cfg, "day_rate", 0.14, float),
                              _get(cfg, "night_rate", 0.09, float),
                              _get(cfg, "peak_price", 3.0, float))
    return truth, source, grid, calendar, tariff


def _manifest(out_dir, command, cfg, seed, input_paths, output_names):
    inputs = {os.path.abspath(p): sha256_file(p) for p in input_paths}
    outputs = {name: sha256_file(os.path.join(out_dir, name))
               for name in output_names}
    write_run_manifest(os.path.join(out_dir, "manifest.json"),
                       RunManifest(command=command, version=__version__,
                                   seed=seed, config=dict(cfg),
                                   inputs=inputs, outputs=outputs))


def _cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    spec = _synth_spec(cfg)
    truth, source, weather = generate(spec)
    grid = weather.grid
    os.makedirs(args.out, exist_ok=True)
    export_site_csv(os.path.join(args.out, "site.csv"), grid, truth)
    realized = WeatherScenario(weather.irradiance_wm2, weather.temp_c,
                               issue_time=grid.timestamp(0), scenario_id=1)
    clearsky = WeatherScenario(weather.clearsky_wm2, weather.temp_c,
                               issue_time=grid.timestamp(0), scenario_id=1)
    export_weather_csv(os.path.join(args.out, "weather.csv"), grid,
                       (realized,))
    export_weather_csv(os.path.join(args.out, "clearsky.csv"), grid,
                       (clearsky,))
    export_scenario_csv(os.path.join(args.out, "scenarios.csv"), grid,
                        source.ensemble(0, grid.steps))
    _manifest(args.out, "synth", cfg, spec.seed, [args.config],
              ["site.csv", "weather.csv", "clearsky.csv", "scenarios.csv"])
    print(json.dumps({"out": args.out, "steps": grid.steps,
                      "seed": spec.seed}))
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    sim = _sim_config(cfg)
    inputs = [args.config]
    truth, source, grid, calendar, tariff = _world(cfg, inputs)
    battery = _battery(cfg)
    e0 = _get(cfg, "e0", 0.0, float)
    trajectory, report = run_closed_loop(sim, truth, source, tariff,
                                         battery, calendar, e0)
    os.makedirs(args.out, exist_ok=True)
    write_trajectory_csv(os.path.join(args.out, "trajectory.csv"), grid,
                         trajectory, calendar)
    write_cost_report_json(os.path.join(args.out, "report.json"), report)
    _manifest(args.out, "simulate", cfg, sim.seed, inputs,
              ["trajectory.csv", "report.json"])
    print(json.dumps({"total": report.total,
                      "energy_cost": report.energy_cost,
                      "peak_cost": report.peak_cost,
                      "terminal_credit": report.terminal_credit}))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    if "sweep_param" not in cfg or "sweep_values" not in cfg:
        raise ConfigError("sweep needs sweep_param and sweep_values")
    param = cfg["sweep_param"].strip()
    raw = [v.strip() for v in cfg["sweep_values"].split(",") if v.strip()]
    if param in ("horizon_m", "m1", "m2", "seed"):
        values = [int(v) for v in raw]
    elif param in ("theta", "filter_alpha", "err_rmse"):
        values = [float(v) for v in raw]
    else:
        values = raw
    sim = _sim_config(cfg)
    inputs = [args.config]
    truth, source, grid, calendar, tariff = _world(cfg, inputs)
    battery = _battery(cfg)
    e0 = _get(cfg, "e0", 0.0, float)
    points = run_sweep(sim, (param, values), truth, source, tariff,
                       battery, calendar, e0)
    os.makedirs(args.out, exist_ok=True)
    write_sweep_csv(os.path.join(args.out, "sweep.csv"), points)
    _manifest(args.out, "sweep", cfg, sim.seed, inputs, ["sweep.csv"])
    print(json.dumps({"param": param, "points": len(points),
                      "best": min(p.report.total for p in points)}))
    return 0


def _cmd_oracle(args) -> int:
    cfg = _load_config(args.config) if args.config else {}
    n = _get(cfg, "steps", 6, int)
    levels = _get(cfg, "grid_levels", 33, int)
    energy_levels = _get(cfg, "energy_levels", 33, int)
    seed = _seed(cfg)
    rng = np.random.default_rng(seed)
    truth = ExogenousData(rng.uniform(25, 70, n), rng.uniform(0, 20, n))
    grid = TimeGrid.from_iso("2024-03-01T00:00:00Z", n)
    tariff = Tariff.day_night(grid, _get(cfg, "day_rate", 0.14, float),
                              _get(cfg, "night_rate", 0.09, float),
                              _get(cfg, "peak_price", 3.0, float))
    battery = BatteryParams(15.0, 8.0, 8.0, 0.93, 0.93)
    calendar = PeakCalendar.uniform(n, n)
    e0 = battery.e_max / 2.0
    sol = solve(build_full_horizon(truth, tariff, battery, calendar, e0))
    dp = dp_oracle(truth, tariff, battery, calendar, e0,
                   grid_levels=levels, energy_levels=energy_levels)
    gap = 100.0 * (dp - sol.objective) / max(abs(sol.objective), 1e-12)
    print(json.dumps({"steps": n, "seed": seed, "lp": sol.objective,
                      "dp": dp, "gap_pct": gap}))
    return 0


def _weather_scenario_one(path):
    grid, payload = ingest_csv(path)
    if not (isinstance(payload, tuple) and payload
            and hasattr(payload[0], "irradiance")):
        raise ConfigError(f"{path} is not a weather file")
    return grid, payload[0]


def _cmd_fit_pv(args) -> int:
    grid, weather = _weather_scenario_one(args.weather)
    sgrid, site = ingest_csv(args.site)
    if not isinstance(site, ExogenousData):
        raise ConfigError(f"{args.site} is not a site file")
    if sgrid != grid:
        raise ConfigError("weather and site files cover different "
                          "timestamps")
    day = weather.irradiance > 0.0
    samples = np.column_stack([weather.irradiance[day],
                               weather.temperature[day], site.pv[day]])
    coeffs = fit_pvusa(samples)
    print(json.dumps({"gamma1": coeffs.gamma1, "gamma2": coeffs.gamma2,
                      "gamma3": coeffs.gamma3,
                      "n_samples": int(day.sum())}))
    return 0


def _cmd_classify(args) -> int:
    grid, weather = _weather_scenario_one(args.weather)
    cgrid, clearsky = _weather_scenario_one(args.clearsky)
    if cgrid != grid:
        raise ConfigError("weather and clear-sky files cover different "
                          "timestamps")
    per_day = int(round(24.0 / grid.step_hours))
    if grid.steps % per_day:
        raise ConfigError("weather file must cover whole days")
    print("day,class")
    for d in range(grid.steps // per_day):
        sl = slice(d * per_day, (d + 1) * per_day)
        label = classify_day(weather.irradiance[sl], clearsky.irradiance[sl],
                             args.threshold)
        print(f"{d},{label.value}")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peakshaver",
        description="Battery peak shaving: synthetic data, closed-loop "
                    "simulation, parameter sweeps, solver cross-checks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="write a seeded synthetic dataset")
    synth.add_argument("--config", required=True)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_cmd_synth)

    sim = sub.add_parser("simulate", help="run one closed loop")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep", help="run once per swept value")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(func=_cmd_sweep)

    oracle = sub.add_parser("oracle",
                            help="compare the LP against the DP oracle")
    oracle.add_argument("--config", default=None)
    oracle.set_defaults(func=_cmd_oracle)

    fit = sub.add_parser("fit-pv", help="fit production regression "
                                        "coefficients")
    fit.add_argument("--weather", required=True)
    fit.add_argument("--site", required=True)
    fit.set_defaults(func=_cmd_fit_pv)

    cls = sub.add_parser("classify", help="label days clear or cloudy")
    cls.add_argument("--weather", required=True)
    cls.add_argument("--clearsky", required=True)
    cls.add_argument("--threshold", type=float, default=0.8)
    cls.set_defaults(func=_cmd_classify)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except PeakShaverError as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err)}),
              file=sys.stderr)
        return 2
    except OSError as err:
        print(json.dumps({"error": "OSError", "message": str(err)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
