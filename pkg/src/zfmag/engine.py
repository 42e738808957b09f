"""Stochastic propagation of the driven sensor through pulse sequences.

A trajectory starts in |+> = (|+1> + |-1>)/sqrt(2), is propagated segment
by segment through a :class:`~zfmag.sequence.PulseSequence` with live OU
noise, and records the populations (P_plus, P_zero, P_minus) at the
requested sample times.  Noise values are held constant over intervals of
at most ``dt_noise`` and the propagator over each interval is an exact
matrix exponential; the slowly varying signal term is evaluated at the
interval midpoint.

Ensembles distribute trajectories over a process pool.  Trajectory ``i``
derives its noise purely from ``(base_seed, i)`` and the reduction runs in
index order, so results are bit-identical for any worker count.

Frames:

* ``"effective"`` -- the rotating-wave matrix; this is the production
  path, with inner loops in :mod:`zfmag._kernels`.
* ``"lab"`` -- the full lab-frame Hamiltonian with explicit carriers,
  orders of magnitude slower; used to cross-check the rotating-wave
  dynamics.  Populations P_plus/P_minus/P_zero are frame-invariant, so
  the two can be compared sample by sample.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .hamiltonian import (DriveConfig, FrameSnapshot, SignalConfig,
                          check_hierarchy, lab_frame_hamiltonian,
                          require_resonance)
from .noise import NoiseChannelSet, NoiseConfig
from .sequence import FREE, PULSE, PulseSequence, Segment
from .spin1 import KET_PLUS, SensorParams

_SQRT2 = np.sqrt(2.0)

# 2 pi pulse in the {|0>, |+>} subspace in the ideal strong-drive limit:
# -1 on |0> and |+>, +1 on |->, i.e. |+-1> -> -|-+1>.
IDEAL_PULSE_UNITARY = np.array([[0, 0, -1],
                                [0, -1, 0],
                                [-1, 0, 0]], dtype=complex)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Perfect sensing-space inversion exp(-i pi X / 2) used by the
# perturbative two-pulse analysis.
IDEAL_PI_X = -1j * PAULI_X


class EngineError(RuntimeError):
    """Integrator tolerance violation or invalid run setup."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Step-size policy of the piecewise-constant exponential integrator.

    ``dt_noise`` is the longest interval over which noise is frozen,
    ``substeps_per_pulse`` the minimum subdivision of each pulse window,
    ``free_step_max`` an optional extra cap on free-evolution steps (the
    lab frame needs it to resolve the drive carriers).  ``ideal_pulses``
    replaces each pulse window by free evolution with an instantaneous
    ideal flip at its center.
    """

    dt_noise: float = 10e-9
    substeps_per_pulse: int = 20
    free_step_max: float | None = None
    frame: str = "effective"
    ideal_pulses: bool = False
    norm_tolerance: float = 1e-9

    def __post_init__(self):
        if self.dt_noise <= 0:
            raise ValueError("dt_noise must be positive")
        if self.substeps_per_pulse < 1:
            raise ValueError("substeps_per_pulse must be >= 1")
        if self.frame not in ("effective", "lab"):
            raise ValueError(f"unknown frame {self.frame!r}")


@dataclass(frozen=True)
class SamplingConfig:
    """Where populations are recorded.

    ``"cycles"`` samples at filter-period boundaries (every 4 tau plus the
    two pulse windows), where the RF precession refocuses; ``"rf_periods"``
    samples at multiples of the bare RF precession period 2 pi / Omega_rf
    (the natural grid for undecoupled runs); ``"uniform"`` every ``every``
    seconds; ``"times"`` an explicit list.  ``"auto"`` picks cycles for
    pulsed sequences and rf_periods otherwise.  The sequence end is always
    included.
    """

    mode: str = "auto"
    every: float | None = None
    times: tuple | None = None
    max_samples: int = 600


@dataclass
class Trajectory:
    """Time-stamped populations for one noise realisation."""

    times: np.ndarray
    populations: np.ndarray
    seed_index: int = 0

    @property
    def p_plus(self):
        return self.populations[:, 0]


@dataclass
class EnsembleResult:
    """Ensemble mean of P_plus with standard errors and config echo."""

    times: np.ndarray
    mean_p_plus: np.ndarray
    stderr_p_plus: np.ndarray
    mean_populations: np.ndarray
    n_realizations: int
    config: dict = field(default_factory=dict)

    def write_csv(self, path):
        data = np.column_stack([self.times, self.mean_p_plus,
                                self.stderr_p_plus])
        np.savetxt(path, data, delimiter=",", fmt="%.17g",
                   header="t_s,mean_p_plus,stderr_p_plus", comments="")

    def to_document(self) -> dict:
        return {
            "config": self.config,
            "n_realizations": self.n_realizations,
            "times_s": self.times.tolist(),
            "mean_p_plus": self.mean_p_plus.tolist(),
            "stderr_p_plus": self.stderr_p_plus.tolist(),
        }


def step_propagator(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) for Hermitian h via eigendecomposition."""
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * dt)) @ evecs.conj().T


def pulse_propagator(drive: DriveConfig, snap: FrameSnapshot,
                     phase: float | None = None, *, duration: float | None = None,
                     substeps: int = 20, signal_term: float = 0.0,
                     warn_hierarchy: bool = True) -> np.ndarray:
    """Propagator of one 2 pi pulse in the rotating-wave picture.

    Integrates the effective Hamiltonian with the MW coupling on over the
    pulse window (default 2 pi / Omega), noise frozen at the snapshot
    values.  In the strong-drive limit this sends |+> to -|+> and leaves
    |-> untouched, i.e. acts as a pi pulse in the |+-1> subspace.
    """
    if warn_hierarchy:
        check_hierarchy(drive, 0.0)
    if duration is None:
        duration = 2.0 * math.pi / drive.mw_rabi
    if phase is None:
        phase = snap.mw_phase
    h = 0.5 * (drive.rf_rabi * (1.0 + snap.eta_r) + signal_term)
    c = (_SQRT2 / 4.0) * drive.mw_rabi * (1.0 + snap.eta_m)
    ph = np.exp(1j * phase)
    hmat = np.array([
        [h, c * ph.conj(), snap.delta_e],
        [c * ph, 0.0, c * ph],
        [snap.delta_e, c * ph.conj(), -h],
    ], dtype=complex)
    u_step = step_propagator(hmat, duration / substeps)
    u = np.eye(3, dtype=complex)
    for _ in range(substeps):
        u = u_step @ u
    return u


def exact_free_propagator(omega_rf: float, delta_e: float, tau: float) -> np.ndarray:
    """Exact 2x2 free propagator exp(-i ((Omega_rf/2) Z + delta_e X) tau)."""
    a = 0.5 * omega_rf
    w = math.hypot(a, delta_e)
    th = w * tau
    if w == 0.0:
        return np.eye(2, dtype=complex)
    n = (a * PAULI_Z + delta_e * PAULI_X) / w
    return math.cos(th) * np.eye(2) - 1j * math.sin(th) * n


def perturbative_free_propagator(omega_rf: float, delta_e: float,
                                 tau: float) -> np.ndarray:
    """Truncated free propagator I - i tau (dE^2/W) Z - i tau (2 dE^3/W^2) X.

    Valid for dE << Omega_rf and Omega_rf * tau an integer multiple of
    2 pi (which kills the first-order transverse term); compare with
    :func:`exact_free_propagator` up to the global sign (-1)^(Omega_rf
    tau / 2 pi).
    """
    if omega_rf <= 0 or tau <= 0:
        raise ValueError("omega_rf and tau must be positive")
    cycles = omega_rf * tau / (2.0 * math.pi)
    if abs(cycles - round(cycles)) > 1e-9 * max(1.0, cycles):
        raise EngineError(
            f"Omega_rf * tau = 2 pi * {cycles:.6g} is not an integer number "
            "of cycles; the expansion only holds on the stroboscopic grid")
    if abs(delta_e) > 0.3 * omega_rf:
        raise EngineError(
            f"delta_e/omega_rf = {delta_e / omega_rf:.3g} is too large for "
            "the perturbative expansion")
    eps2 = tau * delta_e**2 / omega_rf
    eps3 = tau * 2.0 * delta_e**3 / omega_rf**2
    return np.eye(2, dtype=complex) - 1j * eps2 * PAULI_Z - 1j * eps3 * PAULI_X


# ----------------------------------------------------------------------
# Segment tables: the flattened, splittable view of a sequence that the
# kernels consume.

@dataclass
class SegmentTable:
    kinds: np.ndarray
    n_steps: np.ndarray
    dts: np.ndarray
    t0s: np.ndarray
    c_amps: np.ndarray
    ph_re: np.ndarray
    ph_im: np.ndarray
    sample_flags: np.ndarray
    sample_times: np.ndarray
    total_steps: int
    total_duration: float


def resolve_sample_times(seq: PulseSequence, drive: DriveConfig,
                         sampling: SamplingConfig) -> np.ndarray:
    total = seq.total_duration
    mode = sampling.mode
    if mode == "auto":
        mode = "cycles" if seq.n_pulses > 0 else "rf_periods"

    if mode == "times":
        times = np.sort(np.unique(np.asarray(sampling.times, dtype=float)))
    else:
        if mode == "cycles":
            base = seq.cycle_duration
        elif mode == "rf_periods":
            base = (2.0 * math.pi / drive.rf_rabi) if drive.rf_rabi > 0 else 0.0
        elif mode == "uniform":
            if not sampling.every:
                raise ValueError("uniform sampling requires 'every'")
            base = sampling.every
        else:
            raise ValueError(f"unknown sampling mode {sampling.mode!r}")
        if base <= 0 or base > total:
            times = np.empty(0)
        else:
            n = int(math.floor(total / base + 1e-9))
            if n > sampling.max_samples:
                stride = math.ceil(n / sampling.max_samples)
                ks = np.arange(stride, n + 1, stride)
            else:
                ks = np.arange(1, n + 1)
            times = ks * base

    times = times[(times > 0) & (times <= total * (1 + 1e-12))]
    if times.size == 0 or abs(times[-1] - total) > 1e-12 * total:
        times = np.append(times, total)
    return times


def build_segment_table(seq: PulseSequence, sample_times: np.ndarray,
                        integrator: IntegratorConfig,
                        mw_rabi: float) -> SegmentTable:
    """Flatten the sequence into kernel-ready arrays, splitting free and
    pulse windows so every sample time lands on a segment boundary."""
    segments = list(seq.segments)
    if integrator.ideal_pulses:
        replaced = []
        for seg in segments:
            if seg.kind == PULSE and seg.duration > 0:
                half = seg.duration / 2.0
                replaced += [Segment(FREE, half), Segment(PULSE, 0.0, seg.phase),
                             Segment(FREE, half)]
            else:
                replaced.append(seg)
        segments = replaced

    boundary_tol = min(1e-3 * integrator.dt_noise, 1e-12)
    samples = list(sample_times)
    si = 0

    kinds, durs, phases, t0s, flags = [], [], [], [], []
    t = 0.0
    for seg in segments:
        t_end = t + seg.duration
        cursor = t
        while si < len(samples) and samples[si] < t_end - boundary_tol:
            s = samples[si]
            if s > cursor + boundary_tol:
                kinds.append(seg.kind)
                durs.append(s - cursor)
                phases.append(seg.phase)
                t0s.append(cursor)
                flags.append(True)
                cursor = s
            else:
                # sample collides with the previous boundary; flag there
                if flags:
                    flags[-1] = True
            si += 1
        kinds.append(seg.kind)
        durs.append(t_end - cursor)
        phases.append(seg.phase)
        t0s.append(cursor)
        sample_here = (si < len(samples)
                       and abs(samples[si] - t_end) <= boundary_tol)
        if sample_here:
            si += 1
        flags.append(sample_here)
        t = t_end

    n = len(kinds)
    out_kinds = np.empty(n, dtype=np.int64)
    n_steps = np.zeros(n, dtype=np.int64)
    dts = np.zeros(n)
    c_amps = np.zeros(n)
    ph_re = np.ones(n)
    ph_im = np.zeros(n)

    pulse_target = None
    if seq.pulse_duration > 0:
        pulse_target = seq.pulse_duration / integrator.substeps_per_pulse

    for i, (kind, dur, phase) in enumerate(zip(kinds, durs, phases)):
        if kind == FREE:
            out_kinds[i] = _kernels.KIND_FREE
            target = integrator.dt_noise
            if integrator.free_step_max:
                target = min(target, integrator.free_step_max)
        elif dur == 0.0:
            out_kinds[i] = _kernels.KIND_IDEAL
            continue
        else:
            out_kinds[i] = _kernels.KIND_PULSE
            target = min(integrator.dt_noise, pulse_target)
            c_amps[i] = (_SQRT2 / 4.0) * mw_rabi
            ph_re[i] = math.cos(phase)
            ph_im[i] = math.sin(phase)
        if dur > 0.0:
            count = max(1, int(math.ceil(dur / target - 1e-12)))
            n_steps[i] = count
            dts[i] = dur / count

    return SegmentTable(
        kinds=out_kinds, n_steps=n_steps, dts=dts,
        t0s=np.asarray(t0s), c_amps=c_amps, ph_re=ph_re, ph_im=ph_im,
        sample_flags=np.asarray(flags, dtype=bool),
        sample_times=np.concatenate([[0.0], np.asarray(sample_times)]),
        total_steps=int(n_steps.sum()), total_duration=t)


def _check_integrator(table: SegmentTable, integrator: IntegratorConfig,
                      noise: NoiseConfig, drive: DriveConfig,
                      g_ac: float):
    taus = []
    if noise.t2star is not None:
        taus.append(noise.tau_c)
    if noise.eta_r > 0 and not noise.quasi_static_eta:
        taus.append(noise.tau_r)
    if noise.eta_m > 0 and not noise.quasi_static_eta:
        taus.append(noise.tau_m)
    for tau in taus:
        if integrator.dt_noise > tau / 10.0 + 1e-15:
            raise EngineError(
                f"dt_noise = {integrator.dt_noise:.3g} exceeds tau/10 for a "
                f"noise channel with correlation time {tau:.3g}")
    free = table.kinds == _kernels.KIND_FREE
    if integrator.frame == "effective" and free.any():
        dt_max = float(table.dts[free].max())
        h_max = 0.5 * drive.rf_rabi + 0.5 * abs(g_ac) + noise.delta_e_std()
        if dt_max * h_max > 0.2:
            raise EngineError(
                f"free step {dt_max:.3g} x max diagonal frequency "
                f"{h_max:.3g} = {dt_max * h_max:.3g} rad exceeds the 0.2 rad "
                "budget; reduce dt_noise or free_step_max")


def _ou_tables(table: SegmentTable, noise_set: NoiseChannelSet):
    n = table.kinds.shape[0]
    a = np.ones((n, 3))
    b = np.zeros((n, 3))
    for j, proc in enumerate(noise_set.channels()):
        if proc.frozen:
            continue
        col_a = np.exp(-table.dts / proc.params.tau_c)
        a[:, j] = col_a
        b[:, j] = proc.params.stationary_std * np.sqrt(1.0 - col_a * col_a)
    return a, b


def _draw_normals(table: SegmentTable, noise_set: NoiseChannelSet):
    normals = np.empty((max(table.total_steps, 1), 3))
    for j, proc in enumerate(noise_set.channels()):
        normals[:, j] = proc.rng.standard_normal(normals.shape[0])
    return normals


def _signal_params(sensor: SensorParams, signal: SignalConfig | None):
    if signal is None or signal.g_ac == 0.0:
        return 0.0, 1.0
    return signal.g_ac, signal.freq - 2.0 * sensor.ex


def _run_effective(table, noise_set, rf_rabi, g_ac, d_omega, psi0):
    ou_a, ou_b = _ou_tables(table, noise_set)
    x0 = np.array([p.current for p in noise_set.channels()])
    normals = _draw_normals(table, noise_set)
    pops, de, er, em, norm_err = _kernels.run_segments(
        table.kinds, table.n_steps, table.dts, table.t0s, table.c_amps,
        table.ph_re, table.ph_im, ou_a, ou_b, x0, normals,
        rf_rabi, g_ac, d_omega, table.sample_flags,
        np.ascontiguousarray(psi0, dtype=complex))
    for proc, final in zip(noise_set.channels(), (de, er, em)):
        proc.current = final
    return pops, norm_err


def _run_lab(table, noise_set, sensor, drive, signal, psi0):
    ou_a, ou_b = _ou_tables(table, noise_set)
    de, er, em = (p.current for p in noise_set.channels())
    normals = _draw_normals(table, noise_set)
    psi = psi0.astype(complex).copy()

    def record(psi):
        pp = 0.5 * abs(psi[0] + psi[2]) ** 2
        p0 = abs(psi[1]) ** 2
        pm = 0.5 * abs(psi[0] - psi[2]) ** 2
        return pp, p0, pm

    pops = [record(psi)]
    step = 0
    norm_err = 0.0
    for s in range(table.kinds.shape[0]):
        kind = table.kinds[s]
        if kind == _kernels.KIND_IDEAL:
            psi = IDEAL_PULSE_UNITARY @ psi
        else:
            dt = table.dts[s]
            phase = math.atan2(table.ph_im[s], table.ph_re[s])
            mw_on = kind == _kernels.KIND_PULSE
            for k in range(table.n_steps[s]):
                tm = table.t0s[s] + (k + 0.5) * dt
                snap = FrameSnapshot(t=tm, delta_e=de, eta_r=er, eta_m=em,
                                     mw_on=mw_on, mw_phase=phase)
                h = lab_frame_hamiltonian(sensor, drive, signal, snap)
                psi = step_propagator(h, dt) @ psi
                de = de * ou_a[s, 0] + ou_b[s, 0] * normals[step, 0]
                er = er * ou_a[s, 1] + ou_b[s, 1] * normals[step, 1]
                em = em * ou_a[s, 2] + ou_b[s, 2] * normals[step, 2]
                step += 1
        if table.sample_flags[s]:
            pp, p0, pm = record(psi)
            pops.append((pp, p0, pm))
            norm_err = max(norm_err, abs(pp + p0 + pm - 1.0))
    for proc, final in zip(noise_set.channels(), (de, er, em)):
        proc.current = final
    return np.asarray(pops), norm_err


def run_trajectory(sensor: SensorParams, drive: DriveConfig,
                   signal: SignalConfig | None, seq: PulseSequence,
                   noise_set: NoiseChannelSet, integrator: IntegratorConfig,
                   sampling: SamplingConfig = SamplingConfig(),
                   noise_config: NoiseConfig = NoiseConfig(),
                   initial_state: np.ndarray | None = None,
                   seed_index: int = 0,
                   table: SegmentTable | None = None) -> Trajectory:
    """Propagate one noise realisation; see the module docstring.

    ``noise_config`` is only consulted for integrator validation; the
    actual noise comes from ``noise_set``.  A pre-built ``table`` (from
    :func:`build_segment_table`) skips the setup work in ensembles.
    """
    psi0 = KET_PLUS if initial_state is None else initial_state
    g_ac, d_omega = _signal_params(sensor, signal)
    if table is None:
        sample_times = resolve_sample_times(seq, drive, sampling)
        table = build_segment_table(seq, sample_times, integrator,
                                    drive.mw_rabi)
        _check_integrator(table, integrator, noise_config, drive, g_ac)

    if integrator.frame == "effective":
        require_resonance(sensor, drive)
        pops, norm_err = _run_effective(table, noise_set, drive.rf_rabi,
                                        g_ac, d_omega, psi0)
    else:
        pops, norm_err = _run_lab(table, noise_set, sensor, drive, signal,
                                  psi0)
    if norm_err > integrator.norm_tolerance:
        raise EngineError(
            f"trajectory {seed_index}: norm drift {norm_err:.3g} exceeds "
            f"tolerance {integrator.norm_tolerance:.3g}")
    if not np.isfinite(pops).all():
        raise EngineError(f"trajectory {seed_index}: non-finite populations")
    return Trajectory(times=table.sample_times.copy(), populations=pops,
                      seed_index=seed_index)


def _ensemble_chunk(args):
    (table, sensor, drive, signal, integrator, noise_config, base_seed,
     indices, psi0) = args
    g_ac, d_omega = _signal_params(sensor, signal)
    out = np.empty((len(indices), table.sample_flags.sum() + 1, 3))
    for row, idx in enumerate(indices):
        noise_set = NoiseChannelSet.for_trajectory(noise_config, base_seed, idx)
        if integrator.frame == "effective":
            pops, norm_err = _run_effective(table, noise_set, drive.rf_rabi,
                                            g_ac, d_omega, psi0)
        else:
            pops, norm_err = _run_lab(table, noise_set, sensor, drive,
                                      signal, psi0)
        if norm_err > integrator.norm_tolerance:
            raise EngineError(
                f"trajectory {idx}: norm drift {norm_err:.3g} exceeds "
                f"tolerance {integrator.norm_tolerance:.3g}")
        out[row] = pops
    return indices, out


def run_ensemble(sensor: SensorParams, drive: DriveConfig,
                 signal: SignalConfig | None, seq: PulseSequence,
                 noise_config: NoiseConfig, integrator: IntegratorConfig,
                 sampling: SamplingConfig = SamplingConfig(),
                 n_realizations: int = 200, base_seed: int = 0,
                 workers: int = 1,
                 initial_state: np.ndarray | None = None) -> EnsembleResult:
    """Monte Carlo ensemble average of P_plus over noise realisations.

    The result is a pure function of the configuration and ``base_seed``,
    independent of ``workers``.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    psi0 = KET_PLUS if initial_state is None else initial_state
    if integrator.frame == "effective":
        require_resonance(sensor, drive)
    check_hierarchy(drive, noise_config.delta_e_std())
    g_ac, _ = _signal_params(sensor, signal)
    sample_times = resolve_sample_times(seq, drive, sampling)
    table = build_segment_table(seq, sample_times, integrator, drive.mw_rabi)
    _check_integrator(table, integrator, noise_config, drive, g_ac)

    all_indices = np.arange(n_realizations)
    if workers <= 1:
        chunks = [all_indices]
    else:
        chunks = [c for c in np.array_split(all_indices, workers) if c.size]
    jobs = [(table, sensor, drive, signal, integrator, noise_config,
             base_seed, chunk, psi0) for chunk in chunks]

    n_samples = int(table.sample_flags.sum()) + 1
    all_pops = np.empty((n_realizations, n_samples, 3))
    if workers <= 1:
        results = map(_ensemble_chunk, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        try:
            results = list(pool.map(_ensemble_chunk, jobs))
        finally:
            pool.shutdown()
    for indices, pops in results:
        all_pops[indices] = pops

    if not np.isfinite(all_pops).all():
        raise EngineError("non-finite populations in ensemble")

    p_plus = all_pops[:, :, 0]
    mean = p_plus.mean(axis=0)
    if n_realizations > 1:
        stderr = p_plus.std(axis=0, ddof=1) / math.sqrt(n_realizations)
    else:
        stderr = np.zeros_like(mean)

    config = {
        "sensor": asdict(sensor), "drive": asdict(drive),
        "signal": None if signal is None else asdict(signal),
        "sequence": seq.to_dict(), "noise": asdict(noise_config),
        "integrator": asdict(integrator),
        "n_realizations": n_realizations, "base_seed": int(base_seed),
    }
    return EnsembleResult(times=table.sample_times.copy(), mean_p_plus=mean,
                          stderr_p_plus=stderr,
                          mean_populations=all_pops.mean(axis=0),
                          n_realizations=n_realizations, config=config)
