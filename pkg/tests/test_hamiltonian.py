import numpy as np
import pytest
from scipy.linalg import expm

import zfmag as z
from zfmag.hamiltonian import (DriveConfig, FrameSnapshot, ResonanceError,
                               SignalConfig, check_hierarchy)
from zfmag.spin1 import SX, SY, SZ


SENSOR = z.SensorParams(d=z.ghz(2.87), ex=z.khz(300))
DRIVE = DriveConfig.resonant(SENSOR, rf_rabi=z.khz(100), mw_rabi=z.mhz(40))
SIGNAL = SignalConfig.detuned(SENSOR, z.khz(5), z.khz(100))


def random_snapshot(rng, mw_on=True):
    return FrameSnapshot(t=rng.uniform(0, 5e-6),
                         delta_e=rng.normal(0, 1e6),
                         eta_r=rng.normal(0, 0.01),
                         eta_m=rng.normal(0, 0.01),
                         mw_on=mw_on,
                         mw_phase=rng.uniform(0, 2 * np.pi))


def test_lab_frame_reduces_to_static():
    drive = DriveConfig(rf_rabi=0.0, rf_freq=2 * SENSOR.ex, mw_rabi=z.mhz(40),
                        mw_freq=SENSOR.d + SENSOR.ex)
    h = z.lab_frame_hamiltonian(SENSOR, drive, None, FrameSnapshot())
    assert np.max(np.abs(h - z.static_hamiltonian(SENSOR))) < 1e-12 * SENSOR.d


def test_lab_frame_mw_term_at_t0():
    snap = FrameSnapshot(t=0.0, eta_m=0.02, mw_on=True)
    h_on = z.lab_frame_hamiltonian(SENSOR, DRIVE, None, snap)
    h_off = z.lab_frame_hamiltonian(
        SENSOR, DRIVE, None, FrameSnapshot(t=0.0, mw_on=False))
    # cos(0) = 1: difference is exactly Omega (1 + eta_m) Sx
    assert np.max(np.abs((h_on - h_off)
                         - DRIVE.mw_rabi * 1.02 * SX)) < 1e-6


def test_lab_frame_symbolic_substitution_oracle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        snap = random_snapshot(rng)
        h = z.lab_frame_hamiltonian(SENSOR, DRIVE, SIGNAL, snap)
        # independent term-by-term evaluation
        expect = (SENSOR.d * SZ @ SZ
                  + (SENSOR.ex + snap.delta_e) * (SX @ SX - SY @ SY)
                  + SIGNAL.g_ac * np.cos(SIGNAL.freq * snap.t) * SZ
                  + DRIVE.rf_rabi * (1 + snap.eta_r)
                  * np.cos(DRIVE.rf_freq * snap.t) * SZ
                  + DRIVE.mw_rabi * (1 + snap.eta_m)
                  * np.cos(DRIVE.mw_freq * snap.t + snap.mw_phase) * SX)
        # tolerance is ~100 ulp of the D-scale entries
        assert np.max(np.abs(h - expect)) < 1e-13 * SENSOR.d
        assert np.max(np.abs(h - h.conj().T)) < 1e-12 * SENSOR.d


def test_rotating_frame_zero_limit():
    drive = DriveConfig(rf_rabi=0.0, rf_freq=2 * SENSOR.ex, mw_rabi=z.mhz(40),
                        mw_freq=SENSOR.d + SENSOR.ex)
    h = z.rotating_frame_hamiltonian(SENSOR, drive, None,
                                     FrameSnapshot(t=1.234e-6))
    assert np.max(np.abs(h)) < 1e-9


def test_rotating_frame_numeric_transform_oracle():
    rng = np.random.default_rng(21)
    h0 = SENSOR.d * SZ @ SZ + SENSOR.ex * (SX @ SX - SY @ SY)
    for _ in range(10):
        snap = random_snapshot(rng)
        h_int = z.rotating_frame_hamiltonian(SENSOR, DRIVE, SIGNAL, snap)
        u0 = expm(-1j * h0 * snap.t)
        h_lab = z.lab_frame_hamiltonian(SENSOR, DRIVE, SIGNAL, snap)
        expect = u0.conj().T @ (h_lab - h0) @ u0
        assert np.max(np.abs(h_int - expect)) < 1e-9 * SENSOR.d
        assert np.max(np.abs(h_int - h_int.conj().T)) < 1e-12 * SENSOR.d


def test_rotating_frame_diagonal_entry():
    # (1,1) carries [rf drive + signal] cos(2 Ex t)
    snap = FrameSnapshot(t=0.73e-6, eta_r=0.004)
    h = z.rotating_frame_hamiltonian(SENSOR, DRIVE, SIGNAL, snap)
    s = (DRIVE.rf_rabi * 1.004 * np.cos(DRIVE.rf_freq * snap.t)
         + SIGNAL.g_ac * np.cos(SIGNAL.freq * snap.t))
    assert h[0, 0].real == pytest.approx(s * np.cos(2 * SENSOR.ex * snap.t),
                                         rel=1e-9)


def test_effective_free_limit_matches_two_level():
    rng = np.random.default_rng(31)
    for _ in range(10):
        snap = random_snapshot(rng, mw_on=False)
        h3 = z.effective_hamiltonian(SENSOR, DRIVE, SIGNAL, snap)
        h2 = z.two_level_free_hamiltonian(DRIVE, SIGNAL, snap)
        assert h3[0, 0] == pytest.approx(h2[0, 0])
        assert h3[2, 2] == pytest.approx(h2[1, 1])
        assert h3[0, 2] == pytest.approx(h2[0, 1])
        assert abs(h3[0, 1]) == 0.0  # no MW coupling when the pulse is off


def test_effective_pulse_block_structure():
    # g = 0, delta_e = 0, pulse on: pure drive structure
    snap = FrameSnapshot(mw_on=True)
    h = z.effective_hamiltonian(SENSOR, DRIVE, None, snap)
    c = np.sqrt(2) / 4 * DRIVE.mw_rabi
    expect = np.array([[DRIVE.rf_rabi / 2, c, 0],
                       [c, 0, c],
                       [0, c, -DRIVE.rf_rabi / 2]])
    assert np.max(np.abs(h - expect)) < 1e-9


def test_effective_phase_generalisation_hermitian():
    rng = np.random.default_rng(41)
    for _ in range(10):
        snap = random_snapshot(rng)
        h = z.effective_hamiltonian(SENSOR, DRIVE, SIGNAL, snap)
        assert np.max(np.abs(h - h.conj().T)) < 1e-12 * DRIVE.mw_rabi
        # phase only twists the MW couplings
        assert abs(h[0, 1]) == pytest.approx(abs(h[1, 2]))


def test_effective_requires_resonance():
    off = DriveConfig(rf_rabi=z.khz(100), rf_freq=2.5 * SENSOR.ex,
                      mw_rabi=z.mhz(40), mw_freq=SENSOR.d + SENSOR.ex)
    with pytest.raises(ResonanceError):
        z.effective_hamiltonian(SENSOR, off, None, FrameSnapshot())


def test_two_level_signal_zero_crossing():
    # detuning * t = pi/2: signal term vanishes
    t = np.pi / 2 / (SIGNAL.freq - DRIVE.rf_freq)
    h = z.two_level_free_hamiltonian(DRIVE, SIGNAL, FrameSnapshot(t=t))
    assert h[0, 0].real == pytest.approx(DRIVE.rf_rabi / 2, rel=1e-9)


def test_first_order_magnetic_insensitivity_scan():
    # static field offsets shift the clock splitting quadratically
    base = z.SensorParams(d=z.ghz(2.87), ex=z.mhz(8.0))
    offsets = base.ex * np.logspace(-3, -2, 6)
    shifts = []
    for db in offsets:
        p = z.SensorParams(d=base.d, ex=base.ex, delta_bz=db)
        w = np.sort(np.linalg.eigvalsh(z.static_hamiltonian(p)))
        w0 = np.sort(np.linalg.eigvalsh(z.static_hamiltonian(base)))
        shifts.append(w[2] - w0[2])
    slope = np.polyfit(np.log(offsets), np.log(shifts), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_rwa_secular_average_consistency():
    """Averaged over one period of 2 Ex, the rotating-frame Hamiltonian
    matches the effective one up to terms of order Omega_rf / (4 Ex)."""
    period = 2 * np.pi / (2 * SENSOR.ex)
    ts = (np.arange(2000) + 0.5) * period / 2000
    acc = np.zeros((3, 3), dtype=complex)
    for t in ts:
        acc += z.rotating_frame_hamiltonian(SENSOR, DRIVE, None,
                                            FrameSnapshot(t=t))
    avg = acc / len(ts)
    h_eff = z.effective_hamiltonian(SENSOR, DRIVE, None, FrameSnapshot())
    scale = DRIVE.rf_rabi * (DRIVE.rf_rabi / (4 * SENSOR.ex))
    assert np.max(np.abs(avg - h_eff)) < 2.0 * scale


def test_hierarchy_warning():
    weak = DriveConfig.resonant(SENSOR, rf_rabi=z.mhz(20), mw_rabi=z.mhz(40))
    with pytest.warns(UserWarning, match="not >> RF Rabi"):
        check_hierarchy(weak, 0.0)
