import hashlib
import json

import numpy as np
import pytest

from zfmag.cli import main
from zfmag.config import ConfigError, config_hash, resolve_run_config

BASE_CONFIG = {
    "sensor": {"d_ghz": 2.87, "ex_mhz": 0.3},
    "drive": {"rf_rabi_mhz": 0.1, "mw_rabi_mhz": 40.0},
    "signal": {"g_ac_khz": 5.0, "detuning_khz": 100.0},
    "sequence": {"family": "cpmg", "n_pulses": 8},
    "noise": {"t2star_us": 35.0},
    "ensemble": {"n_realizations": 6, "base_seed": 9, "workers": 1},
}


def write_config(tmp_path, overrides=None, name="run.json"):
    cfg = json.loads(json.dumps(BASE_CONFIG))
    for section, values in (overrides or {}).items():
        if values is None:
            cfg.pop(section, None)
        else:
            cfg.setdefault(section, {}).update(values)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ------------------------------------------------------------ configuration

def test_resolve_defaults():
    cfg = resolve_run_config(json.loads(json.dumps(BASE_CONFIG)))
    assert cfg.drive.rf_freq == pytest.approx(2 * cfg.sensor.ex)
    assert cfg.drive.mw_freq == pytest.approx(cfg.sensor.d + cfg.sensor.ex)
    assert cfg.sequence.tau == pytest.approx(2.5e-6)
    assert cfg.sequence.pulse_duration == pytest.approx(
        2 * np.pi / cfg.drive.mw_rabi)


def test_resolve_rejects_weak_mw():
    raw = json.loads(json.dumps(BASE_CONFIG))
    raw["drive"]["mw_rabi_mhz"] = 0.05
    with pytest.raises(ConfigError, match="must exceed"):
        resolve_run_config(raw)


def test_resolve_rejects_off_resonance_without_override():
    raw = json.loads(json.dumps(BASE_CONFIG))
    raw["drive"]["rf_freq_mhz"] = 0.9
    with pytest.raises(ConfigError, match="off the 2 Ex resonance"):
        resolve_run_config(raw)
    raw["drive"]["allow_off_resonance"] = True
    resolve_run_config(raw)  # accepted with the explicit override


def test_resolve_rejects_unknown_section():
    raw = {"sensors": {}}
    with pytest.raises(ConfigError, match="unknown sections"):
        resolve_run_config(raw)


def test_config_hash_stable():
    a = resolve_run_config(json.loads(json.dumps(BASE_CONFIG)))
    b = resolve_run_config(json.loads(json.dumps(BASE_CONFIG)))
    assert config_hash(a.resolved) == config_hash(b.resolved)
    raw = json.loads(json.dumps(BASE_CONFIG))
    raw["ensemble"]["base_seed"] = 10
    c = resolve_run_config(raw)
    assert config_hash(c.resolved) != config_hash(a.resolved)


def test_workers_not_in_resolved_config():
    cfg = resolve_run_config(json.loads(json.dumps(BASE_CONFIG)))
    assert "workers" not in cfg.resolved["ensemble"]


# ------------------------------------------------------------------ simulate

def test_simulate_writes_outputs_and_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(out2),
                 "--workers", "2"]) == 0
    assert sha(out1 / "timeseries.csv") == sha(out2 / "timeseries.csv")
    manifest = json.loads((out1 / "simulate_manifest.json").read_text())
    assert manifest["outputs"] == ["timeseries.csv", "result.json"]
    assert manifest["config_hash"] == config_hash(manifest["config"])


def test_simulate_constant_without_noise_or_signal(tmp_path):
    cfg = write_config(tmp_path, {"signal": None, "noise": {},
                                  "integrator": {"ideal_pulses": True}})
    raw = json.loads(cfg.read_text())
    raw["noise"] = {}
    raw["sequence"]["tau_us"] = 2.5
    cfg.write_text(json.dumps(raw))
    out = tmp_path / "flat"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    data = np.loadtxt(out / "timeseries.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1] - 1.0)) < 1e-9


def test_simulate_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["simulate", "--config", str(bad), "--out",
                 str(tmp_path)]) == 1


def test_simulate_numerical_error_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"integrator": {"dt_noise_us": 5.0}})
    assert main(["simulate", "--config", str(cfg), "--out",
                 str(tmp_path / "x")]) == 2


# ------------------------------------------------------------------- table1

def test_table1_cell_filter(tmp_path):
    out = tmp_path / "t1"
    code = main(["table1", "--cells", "omega_rf=2,control=none,t2star=0.9",
                 "--realizations", "6", "--out", str(out)])
    assert code == 0
    rows = (out / "table1.csv").read_text().splitlines()
    assert len(rows) == 2  # header + one cell
    assert rows[1].startswith("2.0,none,0.9")


def test_table1_bad_filter(tmp_path):
    assert main(["table1", "--cells", "frequency=2", "--out",
                 str(tmp_path)]) == 1
    assert main(["table1", "--cells", "omega_rf=3.3", "--out",
                 str(tmp_path)]) == 1


# ------------------------------------------------------------ scan / filter

def test_scan_small(tmp_path):
    cfg = tmp_path / "scan.json"
    cfg.write_text(json.dumps({
        "rf_rabi_mhz": 6.0, "t2star_us": 1.8, "g_ac_khz": 5.0,
        "detunings_khz": [80.0, 100.0, 120.0],
        "total_time_us": 40.0, "n_realizations": 6, "base_seed": 3,
    }))
    out = tmp_path / "scan"
    assert main(["scan", "--config", str(cfg), "--out", str(out)]) == 0
    data = np.loadtxt(out / "spectrum.csv", delimiter=",", skiprows=1)
    assert data.shape == (3, 3)


def test_filter_dump(tmp_path):
    out = tmp_path / "filt"
    assert main(["filter", "--out", str(out)]) == 0
    rows = (out / "fourier_coefficients.csv").read_text().splitlines()
    assert rows[0] == "n,a_n_closed_form,a_n_quadrature"
    n, closed, quad = rows[1].split(",")
    assert float(closed) == pytest.approx(4 / np.pi)
    assert float(quad) == pytest.approx(float(closed), abs=1e-9)
    resp = (out / "response_function.csv").read_text().splitlines()
    assert resp[1].endswith("+1")


# ----------------------------------------------------------------- validate

def test_validate_passes():
    assert main(["validate"]) == 0


def test_validate_injected_error_fails():
    assert main(["validate", "--inject-error", "sy-sign"]) == 3
