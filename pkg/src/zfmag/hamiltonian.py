"""Time-dependent Hamiltonians of the driven sensor.

Three pictures of the same system, from slowest to build but most complete
to cheapest:

* :func:`lab_frame_hamiltonian` -- the full lab-frame generator with
  explicit RF / MW carrier oscillations (used for cross-checks only);
* :func:`rotating_frame_hamiltonian` -- interaction picture with respect
  to H0 = D Sz^2 + Ex (Sx^2 - Sy^2), still containing all fast terms;
* :func:`effective_hamiltonian` -- the rotating-wave form that drives all
  production simulations.  On resonance (rf frequency = 2 Ex, MW carrier =
  D + Ex) it reads, in the rotating (|+1>, |0>, |-1>)-like basis,

        [ h                c e^{-i phi}   dE            ]
        [ c e^{+i phi}     0              c e^{+i phi}  ]
        [ dE               c e^{-i phi}  -h             ]

  with h = (Omega_rf (1+eta_r) + g_ac cos(dw t)) / 2, the MW coupling
  c = (sqrt(2)/4) Omega (1+eta_m) when a pulse is on (0 otherwise), the
  signal detuning dw = omega_ac - 2 Ex, and dE the electric noise value.
  The phase factors generalise the on-resonance derivation to
  phase-modulated pulse sequences.

The free-evolution restriction to the |+-1> subspace is
:func:`two_level_free_hamiltonian`:  h sigma_z-like diagonal with dE
corners, i.e. Omega_rf sigma_z + g cos sigma_z + 2 dE sigma_x in halved
Pauli convention.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .spin1 import PM_BASIS, SX, SY, SZ, SensorParams, static_hamiltonian

_SQRT2 = np.sqrt(2.0)


class ResonanceError(ValueError):
    """Raised when an operation valid only on resonance is used off it."""


@dataclass(frozen=True)
class DriveConfig:
    """RF and MW drive parameters (angular frequencies, rad/s)."""

    rf_rabi: float
    rf_freq: float
    mw_rabi: float
    mw_freq: float
    mw_phase: float = 0.0

    @classmethod
    def resonant(cls, sensor: SensorParams, rf_rabi: float, mw_rabi: float,
                 mw_phase: float = 0.0):
        """Drive at the resonance conditions rf = 2 Ex, MW = D + Ex."""
        return cls(rf_rabi=rf_rabi, rf_freq=2.0 * sensor.ex,
                   mw_rabi=mw_rabi, mw_freq=sensor.d + sensor.ex,
                   mw_phase=mw_phase)


@dataclass(frozen=True)
class SignalConfig:
    """Target AC field: coupling g_ac and absolute frequency omega_ac."""

    g_ac: float
    freq: float

    @classmethod
    def detuned(cls, sensor: SensorParams, g_ac: float, detuning: float):
        """Signal at omega_ac = 2 Ex + detuning."""
        return cls(g_ac=g_ac, freq=2.0 * sensor.ex + detuning)

    def detuning(self, sensor: SensorParams) -> float:
        return self.freq - 2.0 * sensor.ex


@dataclass(frozen=True)
class FrameSnapshot:
    """Evaluation context for a time-dependent Hamiltonian."""

    t: float = 0.0
    delta_e: float = 0.0
    eta_r: float = 0.0
    eta_m: float = 0.0
    mw_on: bool = False
    mw_phase: float = 0.0


def check_hierarchy(drive: DriveConfig, delta_e_std: float, factor: float = 5.0):
    """Warn when the working hierarchy Omega >> Omega_rf >> std(dE) is violated."""
    if drive.mw_rabi < factor * drive.rf_rabi:
        warnings.warn(
            f"MW Rabi {drive.mw_rabi:.3g} is not >> RF Rabi {drive.rf_rabi:.3g}; "
            "pulse errors will be large", stacklevel=2)
    if delta_e_std > 0 and drive.rf_rabi < factor * delta_e_std:
        warnings.warn(
            f"RF Rabi {drive.rf_rabi:.3g} is not >> electric-noise std "
            f"{delta_e_std:.3g}; noise suppression will be weak", stacklevel=2)


def check_signal_validity(sensor: SensorParams, signal: SignalConfig,
                          factor: float = 5.0):
    """Warn unless |omega_ac - 2 Ex| << Ex (the frequency-mixing regime)."""
    if abs(signal.detuning(sensor)) * factor > sensor.ex:
        warnings.warn(
            f"signal detuning {signal.detuning(sensor):.3g} is not << "
            f"transverse splitting {sensor.ex:.3g}", stacklevel=2)


def lab_frame_hamiltonian(sensor: SensorParams, drive: DriveConfig,
                          signal: SignalConfig | None,
                          snap: FrameSnapshot) -> np.ndarray:
    """Full lab-frame Hamiltonian at one instant.

    Static sensor terms plus dE (Sx^2 - Sy^2), the AC signal on Sz, the RF
    cosine drive on Sz and (when ``snap.mw_on``) the MW cosine drive on Sx
    with phase.  Hermitian by construction.
    """
    h = static_hamiltonian(sensor) + snap.delta_e * (SX @ SX - SY @ SY)
    sz_coeff = drive.rf_rabi * (1.0 + snap.eta_r) * np.cos(drive.rf_freq * snap.t)
    if signal is not None:
        sz_coeff += signal.g_ac * np.cos(signal.freq * snap.t)
    h = h + sz_coeff * SZ
    if snap.mw_on:
        amp = drive.mw_rabi * (1.0 + snap.eta_m)
        h = h + amp * np.cos(drive.mw_freq * snap.t + snap.mw_phase) * SX
    return h


def _frame_energies(sensor: SensorParams) -> np.ndarray:
    """Eigenvalues (D+Ex, 0, D-Ex) of the frame Hamiltonian H0."""
    return np.array([sensor.d + sensor.ex, 0.0, sensor.d - sensor.ex])


def rotating_frame_hamiltonian(sensor: SensorParams, drive: DriveConfig,
                               signal: SignalConfig | None,
                               snap: FrameSnapshot) -> np.ndarray:
    """Interaction-picture Hamiltonian U0^dag (H - H0) U0, closed form.

    H0 = D Sz^2 + Ex (Sx^2 - Sy^2) is diagonal in the (|+>, |0>, |->)
    basis with energies (D+Ex, 0, D-Ex), so the frame transform is a pure
    phase twist there.  The result is returned in the (|+1>, |0>, |-1>)
    basis; with all drives, noise and signal zero it vanishes identically.
    """
    h0 = sensor.d * (SZ @ SZ) + sensor.ex * (SX @ SX - SY @ SY)
    v = lab_frame_hamiltonian(sensor, drive, signal, snap) - h0
    phases = np.exp(1j * _frame_energies(sensor) * snap.t)
    v_pm = PM_BASIS @ v @ PM_BASIS
    v_int = v_pm * np.outer(phases, phases.conj())
    return PM_BASIS @ v_int @ PM_BASIS


def require_resonance(sensor: SensorParams, drive: DriveConfig, rtol=1e-6):
    if abs(drive.rf_freq - 2.0 * sensor.ex) > rtol * max(2.0 * sensor.ex, 1.0):
        raise ResonanceError(
            f"RF frequency {drive.rf_freq:.6g} != 2 Ex = {2 * sensor.ex:.6g}; "
            "the rotating-wave form is only derived on resonance")
    mw_res = sensor.d + sensor.ex
    if abs(drive.mw_freq - mw_res) > rtol * mw_res:
        raise ResonanceError(
            f"MW frequency {drive.mw_freq:.6g} != D + Ex = {mw_res:.6g}; "
            "the rotating-wave form is only derived on resonance")


def effective_hamiltonian(sensor: SensorParams, drive: DriveConfig,
                          signal: SignalConfig | None,
                          snap: FrameSnapshot) -> np.ndarray:
    """Rotating-wave Hamiltonian used by all production simulations.

    Requires the resonance conditions (see :class:`ResonanceError`).
    """
    require_resonance(sensor, drive)
    g_term = 0.0
    if signal is not None:
        g_term = signal.g_ac * np.cos(signal.detuning(sensor) * snap.t)
    h = 0.5 * (drive.rf_rabi * (1.0 + snap.eta_r) + g_term)
    c = 0.0
    if snap.mw_on:
        c = (_SQRT2 / 4.0) * drive.mw_rabi * (1.0 + snap.eta_m)
    ph = np.exp(1j * snap.mw_phase)
    de = snap.delta_e
    return np.array([
        [h, c * ph.conj(), de],
        [c * ph, 0.0, c * ph],
        [de, c * ph.conj(), -h],
    ], dtype=complex)


def two_level_free_hamiltonian(drive: DriveConfig,
                               signal: SignalConfig | None,
                               snap: FrameSnapshot) -> np.ndarray:
    """Free evolution restricted to the |+-1> subspace (2x2 Hermitian).

    Equals the (1,1), (3,3), (1,3) block of :func:`effective_hamiltonian`;
    the signal detuning is taken relative to the RF drive frequency.
    """
    g_term = 0.0
    if signal is not None:
        g_term = signal.g_ac * np.cos((signal.freq - drive.rf_freq) * snap.t)
    h = 0.5 * (drive.rf_rabi * (1.0 + snap.eta_r) + g_term)
    return np.array([[h, snap.delta_e], [snap.delta_e, -h]], dtype=complex)
