"""CSV schemas, config documents, reports, and run manifests."""
import json
import os

import numpy as np
import pytest

from peakshaver.core import (
    ExogenousData,
    PeakCalendar,
    ScenarioEnsemble,
    Tariff,
    TimeGrid,
)
from peakshaver.errors import ConfigError, SchemaError
from peakshaver.forecast import WeatherScenario
from peakshaver.io import (
    RunManifest,
    export_scenario_csv,
    export_site_csv,
    export_weather_csv,
    ingest_csv,
    read_config,
    read_run_manifest,
    sha256_file,
    verify_manifest,
    write_cost_report_json,
    write_run_manifest,
    write_trajectory_csv,
)
from peakshaver.simulator import (
    BatteryParams,
    PerfectForecast,
    SimConfig,
    SimMode,
    run_closed_loop,
)

GRID = TimeGrid.from_iso("2024-05-01T00:00:00Z", 48)


def _site_file(tmp_path, n=48):
    rng = np.random.default_rng(0)
    data = ExogenousData(rng.uniform(10, 50, n).round(3),
                         rng.uniform(0, 20, n).round(3))
    path = str(tmp_path / "site.csv")
    export_site_csv(path, TimeGrid.from_iso("2024-05-01T00:00:00Z", n), data)
    return path, data


def test_site_round_trip(tmp_path):
    path, data = _site_file(tmp_path)
    grid, back = ingest_csv(path)
    assert isinstance(back, ExogenousData)
    assert back.n_steps == 48
    assert np.array_equal(back.demand, data.demand)
    assert grid == GRID
    original = open(path, "rb").read()
    export_site_csv(path, grid, back)
    assert open(path, "rb").read() == original


def test_site_gap_and_duplicate_errors(tmp_path):
    path, _ = _site_file(tmp_path, n=6)
    lines = open(path).read().splitlines()
    gap = lines[:3] + lines[4:]
    gapped = tmp_path / "gap.csv"
    gapped.write_text("\n".join(gap) + "\n")
    with pytest.raises(SchemaError, match="2024-05-01T03:00:00Z"):
        ingest_csv(str(gapped))
    dup = lines[:3] + [lines[2]] + lines[3:]
    duped = tmp_path / "dup.csv"
    duped.write_text("\n".join(dup) + "\n")
    with pytest.raises(SchemaError, match="duplicate"):
        ingest_csv(str(duped))


def test_site_value_errors(tmp_path):
    path, _ = _site_file(tmp_path, n=4)
    lines = open(path).read().splitlines()
    bad = lines[:2] + [lines[2].rsplit(",", 1)[0] + ",-1.0"] + lines[3:]
    target = tmp_path / "neg.csv"
    target.write_text("\n".join(bad) + "\n")
    with pytest.raises(SchemaError, match=r"neg.csv:3: column pv_kw"):
        ingest_csv(str(target))
    bad = lines[:2] + [lines[2].rsplit(",", 1)[0] + ",nan"] + lines[3:]
    target.write_text("\n".join(bad) + "\n")
    with pytest.raises(SchemaError, match="not finite"):
        ingest_csv(str(target))


def test_unknown_header_and_empty(tmp_path):
    path = tmp_path / "odd.csv"
    path.write_text("time,load\n1,2\n")
    with pytest.raises(SchemaError, match="unrecognized header"):
        ingest_csv(str(path))
    path.write_text("timestamp,demand_kw,pv_kw\n")
    with pytest.raises(SchemaError, match="no data rows"):
        ingest_csv(str(path))


def test_scenario_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    ens = ScenarioEnsemble(rng.normal(20, 8, (21, 24)))
    grid = TimeGrid.from_iso("2024-05-01T00:00:00Z", 24)
    path = str(tmp_path / "scen.csv")
    export_scenario_csv(path, grid, ens)
    header = open(path).readline().strip().split(",")
    assert header[:3] == ["timestamp", "s01", "s02"] and len(header) == 22
    back_grid, back = ingest_csv(path)
    assert isinstance(back, ScenarioEnsemble)
    assert back.j == 21 and back.m == 24
    assert np.array_equal(back.nets, ens.nets)
    original = open(path, "rb").read()
    export_scenario_csv(path, back_grid, back)
    assert open(path, "rb").read() == original


def test_scenario_bad_column_name(tmp_path):
    path = tmp_path / "scen.csv"
    path.write_text("timestamp,s01,sXX\n"
                    "2024-05-01T00:00:00Z,1.0,2.0\n"
                    "2024-05-01T01:00:00Z,1.0,2.0\n")
    with pytest.raises(SchemaError, match="s02"):
        ingest_csv(str(path))


def test_weather_round_trip(tmp_path):
    grid = TimeGrid.from_iso("2024-05-01T00:00:00Z", 12)
    rng = np.random.default_rng(2)
    scens = tuple(
        WeatherScenario(rng.uniform(0, 900, 12).round(2),
                        rng.uniform(-5, 25, 12).round(2),
                        issue_time=grid.timestamp(0), scenario_id=j)
        for j in (1, 2, 3))
    path = str(tmp_path / "weather.csv")
    export_weather_csv(path, grid, scens)
    back_grid, back = ingest_csv(path)
    assert back_grid == grid
    assert tuple(s.scenario_id for s in back) == (1, 2, 3)
    assert np.array_equal(back[1].irradiance, scens[1].irradiance)
    assert np.array_equal(back[2].temperature, scens[2].temperature)
    original = open(path, "rb").read()
    export_weather_csv(path, back_grid, back)
    assert open(path, "rb").read() == original


def test_weather_interleaved_rows_rejected(tmp_path):
    path = tmp_path / "weather.csv"
    path.write_text("timestamp,scenario_id,irradiance_wm2,temp_c\n"
                    "2024-05-01T00:00:00Z,1,0.0,10.0\n"
                    "2024-05-01T00:00:00Z,2,0.0,10.0\n"
                    "2024-05-01T01:00:00Z,1,0.0,11.0\n")
    with pytest.raises(SchemaError, match="not contiguous"):
        ingest_csv(str(path))


def test_trajectory_and_report_files(tmp_path):
    n = 24
    rng = np.random.default_rng(5)
    truth = ExogenousData(rng.uniform(20, 50, n), rng.uniform(0, 10, n))
    grid = TimeGrid.from_iso("2024-05-01T00:00:00Z", n)
    cal = PeakCalendar.uniform(n, 12)
    tariff = Tariff.day_night(grid, 0.14, 0.09, 3.0)
    battery = BatteryParams(20, 8, 8, 0.9, 0.9)
    cfg = SimConfig(mode=SimMode.DET_MPC, horizon_m=6)
    traj, rep = run_closed_loop(cfg, truth, PerfectForecast(truth), tariff,
                                battery, cal, 5.0)

    tpath = str(tmp_path / "trajectory.csv")
    write_trajectory_csv(tpath, grid, traj, cal)
    lines = open(tpath).read().splitlines()
    assert lines[0] == ("timestamp,p_grid,p_c,p_dc,energy,curtailed_pv,"
                        "s_init,period_id")
    assert len(lines) == n + 1
    first = lines[1].split(",")
    assert first[0] == "2024-05-01T00:00:00Z"
    assert float(first[4]) == 5.0
    assert first[7] == "1" and lines[13].split(",")[7] == "2"

    rpath = str(tmp_path / "report.json")
    write_cost_report_json(rpath, rep)
    payload = json.loads(open(rpath).read())
    assert set(payload) == {"energy_cost", "peak_cost", "terminal_credit",
                            "total", "peaks"}
    assert payload["total"] == rep.total
    assert payload["peaks"] == list(rep.peaks)


def test_read_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nmode = DetMpc\nhorizon_m = 24 # inline\n"
                    "\nseed=7\n")
    assert read_config(str(path)) == {"mode": "DetMpc", "horizon_m": "24",
                                      "seed": "7"}
    path.write_text("mode DetMpc\n")
    with pytest.raises(ConfigError, match="key = value"):
        read_config(str(path))
    path.write_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="duplicate"):
        read_config(str(path))


def test_manifest_round_trip_and_verify(tmp_path):
    site, _ = _site_file(tmp_path, n=4)
    out = tmp_path / "out.txt"
    out.write_text("payload\n")
    mpath = str(tmp_path / "manifest.json")
    manifest = RunManifest(command="simulate", version="0.1.0", seed=7,
                           config={"mode": "NoStorage"},
                           inputs={"site.csv": sha256_file(site)},
                           outputs={"out.txt": sha256_file(str(out))})
    write_run_manifest(mpath, manifest)
    back = read_run_manifest(mpath)
    assert back == manifest
    assert verify_manifest(mpath) == []
    out.write_text("tampered\n")
    problems = verify_manifest(mpath)
    assert problems == ["output out.txt: digest mismatch"]
    os.unlink(site)
    assert any("missing" in p for p in verify_manifest(mpath))


def test_no_temp_files_left(tmp_path):
    path, data = _site_file(tmp_path)
    leftovers = [f for f in os.listdir(tmp_path) if f.startswith(".tmp-io-")]
    assert leftovers == []
