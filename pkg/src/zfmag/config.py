"""JSON run configurations for the command-line front end.

Frequencies are written the way they are quoted in the lab: ``*_ghz``,
``*_mhz``, ``*_khz`` fields mean "(2pi) x value" angular frequencies, and
``*_us`` fields are microseconds.  A fully-resolved copy of the config
(with every default filled in) is embedded in each output document
together with its SHA-256 hash, so any result file can be reproduced
bit-for-bit from its own metadata.
"""

import hashlib
import json
import math
from dataclasses import dataclass

from .engine import IntegratorConfig, SamplingConfig
from .hamiltonian import DriveConfig, SignalConfig
from .noise import NoiseConfig
from .sequence import PulseSequence, build_sequence, resonance_tau
from .spin1 import SensorParams
from .units import ghz, khz, mhz, us


class ConfigError(ValueError):
    """Invalid or physically inconsistent run configuration."""


@dataclass
class RunConfig:
    """Resolved domain objects for one simulate run plus the echo dict."""

    sensor: SensorParams
    drive: DriveConfig
    signal: SignalConfig | None
    sequence: PulseSequence
    noise: NoiseConfig
    integrator: IntegratorConfig
    sampling: SamplingConfig
    n_realizations: int
    base_seed: int
    workers: int
    resolved: dict


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def _get(section: dict, key: str, default, where: str, kind=float):
    value = section.get(key, default)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, "
                          f"got {value!r}") from None


def resolve_run_config(raw: dict) -> RunConfig:
    """Validate a simulate config and build the domain objects.

    Raises :class:`ConfigError` with the offending key path on invalid
    input; physically inconsistent drives (off-resonant RF without the
    explicit override, MW not stronger than RF) are rejected here.
    """
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    unknown = set(raw) - {"sensor", "drive", "signal", "sequence", "noise",
                          "integrator", "sampling", "ensemble"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")

    sec = raw.get("sensor", {})
    sensor = SensorParams(
        d=ghz(_get(sec, "d_ghz", 2.87, "sensor")),
        ex=mhz(_get(sec, "ex_mhz", 5.0, "sensor")),
        ey=mhz(_get(sec, "ey_mhz", 0.0, "sensor")),
        delta_bz=mhz(_get(sec, "delta_bz_mhz", 0.0, "sensor")))

    sec = raw.get("drive", {})
    rf_rabi = mhz(_get(sec, "rf_rabi_mhz", 4.0, "drive"))
    mw_rabi = mhz(_get(sec, "mw_rabi_mhz", 40.0, "drive"))
    rf_freq_mhz = _get(sec, "rf_freq_mhz", None, "drive")
    mw_freq_mhz = _get(sec, "mw_freq_mhz", None, "drive")
    rf_freq = 2.0 * sensor.ex if rf_freq_mhz is None else mhz(rf_freq_mhz)
    mw_freq = sensor.d + sensor.ex if mw_freq_mhz is None else mhz(mw_freq_mhz)
    allow_off = bool(sec.get("allow_off_resonance", False))
    if rf_rabi <= 0:
        raise ConfigError("drive.rf_rabi_mhz: must be positive")
    if mw_rabi <= rf_rabi:
        raise ConfigError(
            f"drive.mw_rabi_mhz: MW Rabi frequency ({mw_rabi:.3g} rad/s) must "
            f"exceed the RF Rabi frequency ({rf_rabi:.3g} rad/s)")
    if not allow_off:
        if abs(rf_freq - 2.0 * sensor.ex) > 1e-9 * max(2.0 * sensor.ex, 1.0):
            raise ConfigError(
                "drive.rf_freq_mhz: off the 2 Ex resonance; set "
                "drive.allow_off_resonance to accept this deliberately")
        if abs(mw_freq - sensor.d - sensor.ex) > 1e-9 * (sensor.d + sensor.ex):
            raise ConfigError(
                "drive.mw_freq_mhz: off the D + Ex resonance; set "
                "drive.allow_off_resonance to accept this deliberately")
    drive = DriveConfig(rf_rabi=rf_rabi, rf_freq=rf_freq, mw_rabi=mw_rabi,
                        mw_freq=mw_freq,
                        mw_phase=_get(sec, "mw_phase_rad", 0.0, "drive"))

    sec = raw.get("signal")
    signal = None
    if sec:
        g_ac = khz(_get(sec, "g_ac_khz", 0.0, "signal"))
        if g_ac > 0:
            if "freq_mhz" in sec:
                freq = mhz(_get(sec, "freq_mhz", None, "signal"))
            else:
                freq = 2.0 * sensor.ex + khz(
                    _get(sec, "detuning_khz", 100.0, "signal"))
            signal = SignalConfig(g_ac=g_ac, freq=freq)

    sec = raw.get("sequence", {})
    family = str(sec.get("family", "cpmg")).lower()
    tau_us_val = _get(sec, "tau_us", None, "sequence")
    if tau_us_val is None:
        if signal is None:
            raise ConfigError(
                "sequence.tau_us: required when no signal sets the detuning")
        tau = resonance_tau(signal.freq - 2.0 * sensor.ex)
    else:
        tau = us(tau_us_val)
    pd_us = _get(sec, "pulse_duration_us", None, "sequence")
    pulse_duration = (2.0 * math.pi / mw_rabi) if pd_us is None else us(pd_us)
    n_pulses = _get(sec, "n_pulses", 8, "sequence", kind=int)
    phases = sec.get("phases_rad")
    center = bool(sec.get("center_timing", True))
    try:
        seq = build_sequence(family, n_pulses, tau, pulse_duration,
                             phases=phases, center_timing=center)
    except ValueError as exc:
        raise ConfigError(f"sequence: {exc}") from exc

    sec = raw.get("noise", {})
    t2star_us = _get(sec, "t2star_us", None, "noise")
    noise = NoiseConfig(
        t2star=None if t2star_us is None else us(t2star_us),
        tau_c=us(_get(sec, "tau_c_us", 20.0, "noise")),
        eta_r=_get(sec, "eta_r", 0.0, "noise"),
        tau_r=us(_get(sec, "tau_r_us", 500.0, "noise")),
        eta_m=_get(sec, "eta_m", 0.0, "noise"),
        tau_m=us(_get(sec, "tau_m_us", 500.0, "noise")),
        stationary_start_delta_e=bool(sec.get("stationary_start_delta_e", True)),
        stationary_start_eta=bool(sec.get("stationary_start_eta", False)),
        quasi_static_eta=bool(sec.get("quasi_static_eta", False)))

    sec = raw.get("integrator", {})
    frame = str(sec.get("frame", "effective"))
    fsm = _get(sec, "free_step_max_us", None, "integrator")
    try:
        integrator = IntegratorConfig(
            dt_noise=us(_get(sec, "dt_noise_us", 0.01, "integrator")),
            substeps_per_pulse=_get(sec, "substeps_per_pulse", 20,
                                    "integrator", kind=int),
            free_step_max=None if fsm is None else us(fsm),
            frame=frame,
            ideal_pulses=bool(sec.get("ideal_pulses", False)))
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc

    sec = raw.get("sampling", {})
    times = sec.get("times_us")
    every = _get(sec, "every_us", None, "sampling")
    sampling = SamplingConfig(
        mode=str(sec.get("mode", "auto")),
        every=None if every is None else us(every),
        times=None if times is None else tuple(us(t) for t in times),
        max_samples=_get(sec, "max_samples", 600, "sampling", kind=int))

    sec = raw.get("ensemble", {})
    n_realizations = _get(sec, "n_realizations", 100, "ensemble", kind=int)
    base_seed = _get(sec, "base_seed", 12345, "ensemble", kind=int)
    workers = _get(sec, "workers", 1, "ensemble", kind=int)
    if n_realizations < 1:
        raise ConfigError("ensemble.n_realizations: must be >= 1")
    if workers < 1:
        raise ConfigError("ensemble.workers: must be >= 1")

    resolved = {
        "sensor": {"d": sensor.d, "ex": sensor.ex, "ey": sensor.ey,
                   "delta_bz": sensor.delta_bz},
        "drive": {"rf_rabi": drive.rf_rabi, "rf_freq": drive.rf_freq,
                  "mw_rabi": drive.mw_rabi, "mw_freq": drive.mw_freq,
                  "mw_phase": drive.mw_phase},
        "signal": None if signal is None else {"g_ac": signal.g_ac,
                                               "freq": signal.freq},
        "sequence": seq.to_dict(),
        "noise": {"t2star": noise.t2star, "tau_c": noise.tau_c,
                  "eta_r": noise.eta_r, "tau_r": noise.tau_r,
                  "eta_m": noise.eta_m, "tau_m": noise.tau_m,
                  "stationary_start_delta_e": noise.stationary_start_delta_e,
                  "stationary_start_eta": noise.stationary_start_eta,
                  "quasi_static_eta": noise.quasi_static_eta},
        "integrator": {"dt_noise": integrator.dt_noise,
                       "substeps_per_pulse": integrator.substeps_per_pulse,
                       "free_step_max": integrator.free_step_max,
                       "frame": integrator.frame,
                       "ideal_pulses": integrator.ideal_pulses},
        "sampling": {"mode": sampling.mode, "every": sampling.every,
                     "times": sampling.times,
                     "max_samples": sampling.max_samples},
        "ensemble": {"n_realizations": n_realizations,
                     "base_seed": base_seed},
    }
    return RunConfig(sensor=sensor, drive=drive, signal=signal, sequence=seq,
                     noise=noise, integrator=integrator, sampling=sampling,
                     n_realizations=n_realizations, base_seed=base_seed,
                     workers=workers, resolved=resolved)
