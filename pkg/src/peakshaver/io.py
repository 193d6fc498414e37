"""File formats: CSV ingestion and export, config text, reports, manifests.

Every writer emits a canonical form: header row, ISO-8601 UTC timestamps,
repr floats (shortest round-trip), LF line endings, and an atomic rename
into place. Ingesting a canonical file and exporting it again reproduces
the bytes, which is what makes run manifests and determinism checks cheap.

Three CSV schemas are recognized, dispatched on the header row:

    timestamp,demand_kw,pv_kw                    site series
    timestamp,scenario_id,irradiance_wm2,temp_c  weather scenarios
    timestamp,s01,...,sJJ                        net-demand scenario matrix
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import timedelta

import numpy as np

from .core import (
    ExogenousData,
    PeakCalendar,
    ScenarioEnsemble,
    TimeGrid,
    format_timestamp,
    parse_timestamp,
)
from .errors import ConfigError, SchemaError
from .forecast import WeatherScenario

_SITE_HEADER = ("timestamp", "demand_kw", "pv_kw")
_WEATHER_HEADER = ("timestamp", "scenario_id", "irradiance_wm2", "temp_c")
_TRAJECTORY_HEADER = ("timestamp", "p_grid", "p_c", "p_dc", "energy",
                      "curtailed_pv", "s_init", "period_id")


def _fmt(value: float) -> str:
    return repr(float(value))


def _atomic_write(path: str, text: str) -> None:
    """Write text then rename into place so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-io-")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _read_rows(path: str):
    with open(path, "r", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return rows


def _parse_float(path, line, column, text, minimum=None):
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(
            f"{path}:{line}: column {column} has non-numeric value {text!r}")
    if not np.isfinite(value):
        raise SchemaError(
            f"{path}:{line}: column {column} is not finite")
    if minimum is not None and value < minimum:
        raise SchemaError(
            f"{path}:{line}: column {column} must be >= {minimum}, "
            f"got {text}")
    return value


def _parse_stamp(path, line, text):
    try:
        return parse_timestamp(text)
    except Exception:
        raise SchemaError(f"{path}:{line}: bad timestamp {text!r}")


def _grid_from_stamps(path, stamps, first_line):
    """Contiguous TimeGrid from parsed timestamps, or a gap/duplicate error.

    first_line is the file line of stamps[0]; single-row files default to
    one-hour steps.
    """
    if len(stamps) == 1:
        return TimeGrid(stamps[0], 1, 1.0)
    step = (stamps[1] - stamps[0]).total_seconds() / 3600.0
    if step <= 0.0:
        kind = "duplicate" if step == 0.0 else "out-of-order"
        raise SchemaError(
            f"{path}:{first_line + 1}: {kind} timestamp "
            f"{format_timestamp(stamps[1])}")
    for i in range(1, len(stamps)):
        delta = (stamps[i] - stamps[i - 1]).total_seconds() / 3600.0
        if delta == 0.0:
            raise SchemaError(
                f"{path}:{first_line + i}: duplicate timestamp "
                f"{format_timestamp(stamps[i])}")
        if abs(delta - step) > 1e-9:
            missing = stamps[i - 1] + timedelta(hours=step)
            raise SchemaError(
                f"{path}:{first_line + i}: gap before "
                f"{format_timestamp(stamps[i])}; expected "
                f"{format_timestamp(missing)}")
    return TimeGrid(stamps[0], len(stamps), step)


def _ingest_site(path, rows):
    stamps, demand, pv = [], [], []
    for offset, row in enumerate(rows):
        line = offset + 2
        if len(row) != 3:
            raise SchemaError(f"{path}:{line}: expected 3 columns, "
                              f"got {len(row)}")
        stamps.append(_parse_stamp(path, line, row[0]))
        demand.append(_parse_float(path, line, "demand_kw", row[1], 0.0))
        pv.append(_parse_float(path, line, "pv_kw", row[2], 0.0))
    grid = _grid_from_stamps(path, stamps, 2)
    return grid, ExogenousData(np.array(demand), np.array(pv))


def _ingest_weather(path, rows):
    groups = {}
    order = []
    for offset, row in enumerate(rows):
        line = offset + 2
        if len(row) != 4:
            raise SchemaError(f"{path}:{line}: expected 4 columns, "
                              f"got {len(row)}")
        stamp = _parse_stamp(path, line, row[0])
        try:
            sid = int(row[1])
        except ValueError:
            raise SchemaError(f"{path}:{line}: column scenario_id has "
                              f"non-integer value {row[1]!r}")
        irr = _parse_float(path, line, "irradiance_wm2", row[2], 0.0)
        temp = _parse_float(path, line, "temp_c", row[3])
        if sid not in groups:
            order.append(sid)
            groups[sid] = ([], [], [], line)
        elif order[-1] != sid:
            raise SchemaError(f"{path}:{line}: scenario {sid} rows are "
                              "not contiguous")
        groups[sid][0].append(stamp)
        groups[sid][1].append(irr)
        groups[sid][2].append(temp)

    grid = None
    scenarios = []
    for sid in order:
        stamps, irr, temp, first = groups[sid]
        g = _grid_from_stamps(path, stamps, first)
        if grid is None:
            grid = g
        elif g != grid:
            raise SchemaError(f"{path}: scenario {sid} covers different "
                              "timestamps than scenario "
                              f"{order[0]}")
        scenarios.append(WeatherScenario(np.array(irr), np.array(temp),
                                         issue_time=grid.timestamp(0),
                                         scenario_id=sid))
    return grid, tuple(scenarios)


def _ingest_scenarios(path, header, rows):
    names = header[1:]
    for k, name in enumerate(names):
        if name != f"s{k + 1:02d}":
            raise SchemaError(f"{path}:1: scenario column {k + 2} must be "
                              f"named s{k + 1:02d}, got {name!r}")
    stamps = []
    nets = []
    for offset, row in enumerate(rows):
        line = offset + 2
        if len(row) != len(header):
            raise SchemaError(f"{path}:{line}: expected {len(header)} "
                              f"columns, got {len(row)}")
        stamps.append(_parse_stamp(path, line, row[0]))
        nets.append([_parse_float(path, line, names[k], cell)
                     for k, cell in enumerate(row[1:])])
    grid = _grid_from_stamps(path, stamps, 2)
    return grid, ScenarioEnsemble(np.array(nets).T)


def ingest_csv(path: str):
    """Read one of the documented CSV schemas.

    Returns (TimeGrid, payload) where the payload is ExogenousData, a tuple
    of WeatherScenario, or a ScenarioEnsemble depending on the header.
    """
    rows = _read_rows(path)
    header = tuple(cell.strip() for cell in rows[0])
    if len(rows) == 1:
        raise SchemaError(f"{path}: no data rows")
    if header == _SITE_HEADER:
        return _ingest_site(path, rows[1:])
    if header == _WEATHER_HEADER:
        return _ingest_weather(path, rows[1:])
    if (len(header) >= 2 and header[0] == "timestamp"
            and all(name.startswith("s") for name in header[1:])):
        return _ingest_scenarios(path, header, rows[1:])
    raise SchemaError(
        f"{path}:1: unrecognized header {','.join(header)!r}; expected "
        f"{','.join(_SITE_HEADER)} or {','.join(_WEATHER_HEADER)} or "
        "timestamp,s01,...")


def export_site_csv(path: str, grid: TimeGrid, data: ExogenousData) -> None:
    if data.n_steps != grid.steps:
        raise SchemaError(f"data has {data.n_steps} steps but the grid "
                          f"has {grid.steps}")
    lines = [",".join(_SITE_HEADER)]
    for t in range(grid.steps):
        lines.append(f"{format_timestamp(grid.timestamp(t))},"
                     f"{_fmt(data.demand[t])},{_fmt(data.pv[t])}")
    _atomic_write(path, "\n".join(lines) + "\n")


def export_weather_csv(path: str, grid: TimeGrid, scenarios) -> None:
    lines = [",".join(_WEATHER_HEADER)]
    for scen in scenarios:
        if len(scen.irradiance) != grid.steps:
            raise SchemaError(f"scenario {scen.scenario_id} has "
                              f"{len(scen.irradiance)} steps but the grid "
                              f"has {grid.steps}")
        for t in range(grid.steps):
            lines.append(f"{format_timestamp(grid.timestamp(t))},"
                         f"{scen.scenario_id},{_fmt(scen.irradiance[t])},"
                         f"{_fmt(scen.temperature[t])}")
    _atomic_write(path, "\n".join(lines) + "\n")


def export_scenario_csv(path: str, grid: TimeGrid,
                        ensemble: ScenarioEnsemble) -> None:
    if ensemble.m != grid.steps:
        raise SchemaError(f"ensemble spans {ensemble.m} steps but the grid "
                          f"has {grid.steps}")
    header = ["timestamp"] + [f"s{j + 1:02d}" for j in range(ensemble.j)]
    lines = [",".join(header)]
    for t in range(grid.steps):
        cells = [format_timestamp(grid.timestamp(t))]
        cells.extend(_fmt(ensemble.nets[j, t]) for j in range(ensemble.j))
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_trajectory_csv(path: str, grid: TimeGrid, trajectory,
                         calendar: PeakCalendar) -> None:
    """Realized run as CSV; energy and s_init are the state entering each step."""
    n = trajectory.n_steps
    if grid.steps != n or calendar.n_steps != n:
        raise SchemaError("trajectory, grid and calendar lengths differ")
    lines = [",".join(_TRAJECTORY_HEADER)]
    for t in range(n):
        lines.append(",".join([
            format_timestamp(grid.timestamp(t)),
            _fmt(trajectory.p_grid[t]),
            _fmt(trajectory.p_c[t]),
            _fmt(trajectory.p_dc[t]),
            _fmt(trajectory.energy[t]),
            _fmt(trajectory.curtail[t]),
            _fmt(trajectory.s_init[t]),
            str(calendar.period_of(t)),
        ]))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_cost_report_json(path: str, report) -> None:
    payload = {
        "energy_cost": float(report.energy_cost),
        "peak_cost": float(report.peak_cost),
        "terminal_credit": float(report.terminal_credit),
        "total": float(report.total),
        "peaks": [float(p) for p in report.peaks],
    }
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def write_sweep_csv(path: str, points) -> None:
    lines = ["param,value,energy_cost,peak_cost,terminal_credit,total"]
    for point in points:
        rep = point.report
        value = point.value
        cell = _fmt(value) if isinstance(value, float) else str(value)
        lines.append(f"{point.param},{cell},{_fmt(rep.energy_cost)},"
                     f"{_fmt(rep.peak_cost)},{_fmt(rep.terminal_credit)},"
                     f"{_fmt(rep.total)}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_config(path: str) -> dict:
    """Flat `key = value` document; '#' starts a comment, blanks ignored."""
    out = {}
    with open(path, "r") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(
                    f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to re-execute a run and check its outputs.

    inputs and outputs map paths (relative to the manifest) to sha256
    digests of their bytes; config echoes the fully resolved settings.
    """
    command: str
    version: str
    seed: int
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)


def write_run_manifest(path: str, manifest: RunManifest) -> None:
    payload = {
        "command": manifest.command,
        "version": manifest.version,
        "seed": int(manifest.seed),
        "config": dict(sorted(manifest.config.items())),
        "inputs": dict(sorted(manifest.inputs.items())),
        "outputs": dict(sorted(manifest.outputs.items())),
    }
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def read_run_manifest(path: str) -> RunManifest:
    with open(path, "r") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as err:
            raise SchemaError(f"{path}: not valid JSON: {err}")
    try:
        return RunManifest(command=payload["command"],
                           version=payload["version"],
                           seed=int(payload["seed"]),
                           config=dict(payload["config"]),
                           inputs=dict(payload["inputs"]),
                           outputs=dict(payload["outputs"]))
    except (KeyError, TypeError) as err:
        raise SchemaError(f"{path}: manifest missing field {err}")


def verify_manifest(path: str) -> list:
    """Re-digest every file a manifest names; return mismatch descriptions."""
    manifest = read_run_manifest(path)
    base = os.path.dirname(os.path.abspath(path))
    problems = []
    for kind, table in (("input", manifest.inputs),
                        ("output", manifest.outputs)):
        for rel, expected in table.items():
            target = rel if os.path.isabs(rel) else os.path.join(base, rel)
            if not os.path.exists(target):
                problems.append(f"{kind} {rel}: missing")
            elif sha256_file(target) != expected:
                problems.append(f"{kind} {rel}: digest mismatch")
    return problems
