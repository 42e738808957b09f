import math

import numpy as np
import pytest

import zfmag as z
from zfmag.engine import (EngineError, IDEAL_PI_X, IntegratorConfig,
                          SamplingConfig, build_segment_table,
                          exact_free_propagator, perturbative_free_propagator,
                          pulse_propagator, resolve_sample_times,
                          run_ensemble, run_trajectory, step_propagator)
from zfmag.hamiltonian import DriveConfig, FrameSnapshot, ResonanceError, SignalConfig
from zfmag.noise import NoiseChannelSet, NoiseConfig
from zfmag.spin1 import KET_0, KET_MINUS, KET_PLUS, SensorParams

SENSOR = z.SensorParams(d=z.ghz(2.87), ex=z.khz(300))
DRIVE = DriveConfig.resonant(SENSOR, rf_rabi=z.khz(100), mw_rabi=z.mhz(40))
NO_NOISE = NoiseConfig()


def fresh_channels(index=0, config=NO_NOISE, seed=1):
    return NoiseChannelSet.for_trajectory(config, seed, index)


# ---------------------------------------------------------------- propagators

def test_step_propagator_identity():
    assert np.allclose(step_propagator(np.zeros((3, 3)), 1e-6), np.eye(3))


def test_step_propagator_diagonal():
    a = 2 * np.pi * 1e6
    u = step_propagator(np.diag([a, 0.0, -a]).astype(complex), 1e-7)
    expect = np.diag([np.exp(-1j * a * 1e-7), 1.0, np.exp(1j * a * 1e-7)])
    assert np.max(np.abs(u - expect)) < 1e-12


def test_step_propagator_taylor_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = (m + m.conj().T) / 2
        dt = 0.1 / np.linalg.norm(h, 2)
        u = step_propagator(h, dt)
        taylor = np.zeros((3, 3), dtype=complex)
        term = np.eye(3, dtype=complex)
        for k in range(20):
            taylor = taylor + term
            term = term @ (-1j * h * dt) / (k + 1)
        assert np.max(np.abs(u - taylor)) < 1e-10
        assert np.max(np.abs(u.conj().T @ u - np.eye(3))) < 1e-12


def test_pulse_flips_plus_keeps_minus():
    # strong-drive limit: |+> -> -|+>, |-> untouched, up to 1e-3
    drive = DriveConfig.resonant(SENSOR, rf_rabi=z.mhz(40) / 1000,
                                 mw_rabi=z.mhz(40))
    u = pulse_propagator(drive, FrameSnapshot(), warn_hierarchy=False)
    assert np.max(np.abs(u @ KET_PLUS + KET_PLUS)) < 1e-3
    assert np.max(np.abs(u @ KET_MINUS - KET_MINUS)) < 2e-3


def test_pulse_subspace_pi_rotation():
    # Omega = 100 Omega_rf: the |+-1> block is an antidiagonal pi rotation
    drive = DriveConfig.resonant(SENSOR, rf_rabi=z.mhz(0.4),
                                 mw_rabi=z.mhz(40))
    u = pulse_propagator(drive, FrameSnapshot(), warn_hierarchy=False)
    err = max(abs(u[0, 0]), abs(u[2, 2]),
              abs(abs(u[0, 2]) - 1.0), abs(abs(u[2, 0]) - 1.0),
              abs((u @ KET_PLUS)[1]))
    assert err < 1e-3


def test_pulse_leakage_scaling():
    # population pushed from |0> out to the spectator state scales as
    # (Omega_rf / Omega)^2
    ratios = np.logspace(-3, -1, 7)
    leaks = []
    for r in ratios:
        drive = DriveConfig.resonant(SENSOR, rf_rabi=r * z.mhz(40),
                                     mw_rabi=z.mhz(40))
        u = pulse_propagator(drive, FrameSnapshot(), warn_hierarchy=False)
        leaks.append(abs(KET_MINUS.conj() @ u @ KET_0) ** 2)
    slope = np.polyfit(np.log(ratios), np.log(leaks), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_pulse_phase_independent_subspace_action():
    drive = DriveConfig.resonant(SENSOR, rf_rabi=z.khz(100),
                                 mw_rabi=z.mhz(40))
    u0 = pulse_propagator(drive, FrameSnapshot(), phase=0.0,
                          warn_hierarchy=False)
    u1 = pulse_propagator(drive, FrameSnapshot(), phase=1.3,
                          warn_hierarchy=False)
    assert abs(abs(u0[0, 2]) - abs(u1[0, 2])) < 1e-9


# ------------------------------------------------------------- trajectories

@pytest.mark.parametrize("n_pulses", [2, 8, 32])
def test_echo_identity(n_pulses):
    tau = z.resonance_tau(z.khz(100))
    seq = z.build_sequence("cpmg", n_pulses, tau, 0.0)
    traj = run_trajectory(SENSOR, DRIVE, None, seq, fresh_channels(),
                          IntegratorConfig(dt_noise=50e-9, ideal_pulses=True))
    assert abs(traj.p_plus[-1] - 1.0) < 1e-6
    assert np.max(np.abs(traj.populations.sum(axis=1) - 1.0)) < 1e-9


def test_trajectory_matches_accumulated_phase():
    g, dw = z.khz(5), z.khz(100)
    signal = SignalConfig.detuned(SENSOR, g, dw)
    tau = z.resonance_tau(dw)
    seq = z.build_sequence("cpmg", 40, tau, 2 * np.pi / DRIVE.mw_rabi,
                           center_timing=True)
    traj = run_trajectory(SENSOR, DRIVE, signal, seq, fresh_channels(),
                          IntegratorConfig())
    pred = 0.5 * (1 + np.cos([z.accumulated_phase(g, dw, t)
                              for t in traj.times]))
    assert np.max(np.abs(traj.p_plus - pred)) < 0.02


def test_trajectory_bitwise_deterministic():
    cfg = NoiseConfig(t2star=1.8e-6, eta_r=0.005, eta_m=0.005)
    tau = z.resonance_tau(z.khz(100))
    seq = z.build_sequence("ldd8b", 8, tau, 2 * np.pi / DRIVE.mw_rabi)
    a = run_trajectory(SENSOR, DRIVE, None, seq, fresh_channels(3, cfg),
                       IntegratorConfig(), noise_config=cfg)
    b = run_trajectory(SENSOR, DRIVE, None, seq, fresh_channels(3, cfg),
                       IntegratorConfig(), noise_config=cfg)
    assert np.array_equal(a.populations, b.populations)


def test_toggling_frame_consistency():
    """Two-level toggling propagation with f(t) against explicit pulses.

    With zero noise the free Hamiltonian is diagonal, so the toggled
    phase is an integral of f(t) [Omega_rf + g cos(dw t)]; the engine's
    three-level propagation with real 2 pi pulses must agree at the
    refocusing points when Omega >= 100 Omega_rf.
    """
    g, dw = z.khz(5), z.khz(100)
    signal = SignalConfig.detuned(SENSOR, g, dw)
    tau = z.resonance_tau(dw)
    seq = z.build_sequence("cpmg", 16, tau, 2 * np.pi / DRIVE.mw_rabi,
                           center_timing=True)
    traj = run_trajectory(SENSOR, DRIVE, signal, seq, fresh_channels(),
                          IntegratorConfig())
    resp = z.response_function(seq)

    from scipy.integrate import quad
    for t, p in zip(traj.times[1:], traj.p_plus[1:]):
        phase = quad(lambda u: float(resp.value(u))
                     * (DRIVE.rf_rabi + g * math.cos(dw * u)),
                     0, t, points=list(resp.flip_times), limit=300)[0]
        assert abs(p - 0.5 * (1 + math.cos(phase))) < 0.01


def test_phase_pattern_neutrality_at_zero_error():
    tau = z.resonance_tau(z.khz(100))
    signal = SignalConfig.detuned(SENSOR, z.khz(5), z.khz(100))
    results = []
    for family in ("cpmg", "ldd8b"):
        seq = z.build_sequence(family, 8, tau, 2 * np.pi / DRIVE.mw_rabi,
                               center_timing=True)
        traj = run_trajectory(SENSOR, DRIVE, signal, seq, fresh_channels(),
                              IntegratorConfig(ideal_pulses=True))
        results.append(traj.p_plus)
    assert np.max(np.abs(results[0] - results[1])) < 1e-6


def test_scheduling_resonance_maximizes_contrast():
    g, dw0 = z.khz(5), z.khz(100)
    signal = SignalConfig.detuned(SENSOR, g, dw0)
    taus = z.resonance_tau(dw0) * np.linspace(0.7, 1.3, 7)
    total = 80e-6
    contrasts = []
    for tau in taus:
        n = 2 * max(1, round(total / (4 * tau)))
        seq = z.build_sequence("cpmg", n, tau, 0.0, center_timing=True)
        traj = run_trajectory(SENSOR, DRIVE, signal, seq, fresh_channels(),
                              IntegratorConfig(dt_noise=50e-9,
                                               ideal_pulses=True))
        contrasts.append(1.0 - 2.0 * traj.p_plus[-1])
    assert np.argmax(contrasts) == 3  # the resonant grid point


def test_step_halving_convergence():
    # no noise: halving every integrator step barely moves the endpoint
    g, dw = z.khz(5), z.khz(100)
    signal = SignalConfig.detuned(SENSOR, g, dw)
    tau = z.resonance_tau(dw)
    seq = z.build_sequence("cpmg", 8, tau, 2 * np.pi / DRIVE.mw_rabi,
                           center_timing=True)
    ends = []
    for dt, sub in ((10e-9, 20), (5e-9, 40)):
        traj = run_trajectory(SENSOR, DRIVE, signal, seq, fresh_channels(),
                              IntegratorConfig(dt_noise=dt,
                                               substeps_per_pulse=sub))
        ends.append(traj.p_plus[-1])
    assert abs(ends[0] - ends[1]) < 1e-4


def test_ensemble_worker_count_invariance():
    cfg = NoiseConfig(t2star=1.8e-6, eta_r=0.005, eta_m=0.005)
    tau = z.resonance_tau(z.khz(100))
    seq = z.build_sequence("cpmg", 8, tau, 2 * np.pi / DRIVE.mw_rabi)
    kwargs = dict(n_realizations=8, base_seed=77)
    r1 = run_ensemble(SENSOR, DRIVE, None, seq, cfg, IntegratorConfig(),
                      workers=1, **kwargs)
    r2 = run_ensemble(SENSOR, DRIVE, None, seq, cfg, IntegratorConfig(),
                      workers=2, **kwargs)
    assert np.array_equal(r1.mean_p_plus, r2.mean_p_plus)
    assert np.array_equal(r1.stderr_p_plus, r2.stderr_p_plus)


def test_ensemble_stderr_scaling():
    cfg = NoiseConfig(t2star=1.8e-6)
    tau = z.resonance_tau(z.khz(100))
    seq = z.build_sequence("cpmg", 4, tau, 0.0)
    integ = IntegratorConfig(dt_noise=0.2e-6, ideal_pulses=True)
    errs = []
    for n in (100, 400, 1600):
        res = run_ensemble(SENSOR, DRIVE, None, seq, cfg, integ,
                           n_realizations=n, base_seed=11, workers=2)
        errs.append(res.stderr_p_plus[-1])
    # stderr shrinks as 1/sqrt(n): each quadrupling halves it
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.35)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.35)


def test_ensemble_csv_and_document(tmp_path):
    cfg = NoiseConfig(t2star=1.8e-6)
    tau = z.resonance_tau(z.khz(100))
    seq = z.build_sequence("cpmg", 4, tau, 0.0)
    res = run_ensemble(SENSOR, DRIVE, None, seq, cfg,
                       IntegratorConfig(dt_noise=0.2e-6, ideal_pulses=True),
                       n_realizations=4, base_seed=3)
    path = tmp_path / "series.csv"
    res.write_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (len(res.times), 3)
    doc = res.to_document()
    assert doc["n_realizations"] == 4
    assert doc["config"]["base_seed"] == 3
    assert doc["config"]["sequence"]["family"] == "cpmg"


# ---------------------------------------------------- perturbative expansion

def test_perturbative_identity_at_zero_noise():
    omega_rf = z.mhz(2.0)
    u = perturbative_free_propagator(omega_rf, 0.0, 2.5e-6)
    assert np.array_equal(u, np.eye(2, dtype=complex))


def test_perturbative_deviation_scaling():
    omega_rf = z.mhz(2.0)
    tau = 2.5e-6
    ratios = np.logspace(-3, -1.5, 8)
    devs = []
    for r in ratios:
        de = r * omega_rf
        exact = exact_free_propagator(omega_rf, de, tau)
        sign = 1.0 if math.cos(0.5 * omega_rf * tau) >= 0 else -1.0
        approx = perturbative_free_propagator(omega_rf, de, tau)
        devs.append(np.max(np.abs(sign * exact - approx)))
    slope = np.polyfit(np.log(ratios), np.log(devs), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.3)


def test_two_pulse_product_third_order():
    omega_rf = z.mhz(2.0)
    tau = 2.5e-6
    de = 0.01 * omega_rf
    u_tau = exact_free_propagator(omega_rf, de, tau)
    u_2tau = exact_free_propagator(omega_rf, de, 2 * tau)
    u = u_tau @ IDEAL_PI_X @ u_2tau @ IDEAL_PI_X @ u_tau
    # diagonal -1 + O(dE^6), off-diagonal i 8 dE^3 tau / W^2
    assert u[0, 0].real == pytest.approx(-1.0, abs=1e-6)
    expect = 8 * de**3 * tau / omega_rf**2
    assert abs(u[0, 1]) == pytest.approx(expect, rel=0.05)
    assert u[0, 1].imag == pytest.approx(expect, rel=0.05)


def test_even_pulse_residual_third_order_exponent():
    omega_rf = z.mhz(2.0)
    tau = 2.5e-6
    ratios = np.logspace(-3, -2, 6)
    errs = []
    for r in ratios:
        de = r * omega_rf
        u_tau = exact_free_propagator(omega_rf, de, tau)
        u_2tau = exact_free_propagator(omega_rf, de, 2 * tau)
        u = u_tau @ IDEAL_PI_X @ u_2tau @ IDEAL_PI_X @ u_tau
        errs.append(np.max(np.abs(u + np.eye(2))))
    slope = np.polyfit(np.log(ratios), np.log(errs), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.3)


def test_perturbative_preconditions():
    with pytest.raises(EngineError):
        perturbative_free_propagator(z.mhz(2.0), 1.0, 2.6e-6)  # off-grid tau
    with pytest.raises(EngineError):
        perturbative_free_propagator(z.mhz(2.0), 0.9 * z.mhz(2.0), 2.5e-6)


# ----------------------------------------------------------- configuration

def test_integrator_rejects_coarse_noise_step():
    cfg = NoiseConfig(t2star=1.8e-6)
    tau = z.resonance_tau(z.khz(100))
    seq = z.build_sequence("cpmg", 2, tau, 0.0)
    with pytest.raises(EngineError, match="dt_noise"):
        run_ensemble(SENSOR, DRIVE, None, seq, cfg,
                     IntegratorConfig(dt_noise=5e-6), n_realizations=1,
                     base_seed=0)


def test_effective_frame_requires_resonance():
    off = DriveConfig(rf_rabi=z.khz(100), rf_freq=3 * SENSOR.ex,
                      mw_rabi=z.mhz(40), mw_freq=SENSOR.d + SENSOR.ex)
    tau = z.resonance_tau(z.khz(100))
    seq = z.build_sequence("cpmg", 2, tau, 0.0)
    with pytest.raises(ResonanceError):
        run_trajectory(SENSOR, off, None, seq, fresh_channels(),
                       IntegratorConfig(ideal_pulses=True))


def test_sample_times_modes():
    tau = z.resonance_tau(z.khz(100))
    seq = z.build_sequence("cpmg", 8, tau, 0.0, center_timing=True)
    cycles = resolve_sample_times(seq, DRIVE, SamplingConfig(mode="cycles"))
    assert np.allclose(cycles, 4 * tau * np.arange(1, 5))
    uniform = resolve_sample_times(seq, DRIVE,
                                   SamplingConfig(mode="uniform", every=5e-6))
    assert uniform[0] == pytest.approx(5e-6)
    explicit = resolve_sample_times(
        seq, DRIVE, SamplingConfig(mode="times", times=(1e-6, 2e-6)))
    assert list(explicit) == [1e-6, 2e-6, seq.total_duration]


def test_sample_times_land_on_boundaries():
    tau = z.resonance_tau(z.khz(100))
    seq = z.build_sequence("cpmg", 8, tau, 2 * np.pi / DRIVE.mw_rabi,
                           center_timing=True)
    times = resolve_sample_times(seq, DRIVE, SamplingConfig())
    table = build_segment_table(seq, times, IntegratorConfig(),
                                DRIVE.mw_rabi)
    assert int(table.sample_flags.sum()) == len(times)
    assert table.total_duration == pytest.approx(seq.total_duration)
