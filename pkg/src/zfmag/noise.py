"""Ornstein-Uhlenbeck noise channels.

Three stochastic channels drive every simulation:

* ``delta_e`` -- electric / second-order-magnetic level fluctuation, an
  angular frequency (rad/s), parameterised by the dephasing time T2*;
* ``eta_r`` -- relative RF drive-amplitude error (dimensionless);
* ``eta_m`` -- relative MW pulse-amplitude error (dimensionless).

Each channel is an exact-update OU process: for any step ``dt``

    x(t+dt) = x(t) e^{-dt/tau_c} + n sqrt(c tau_c / 2) sqrt(1 - e^{-2 dt/tau_c})

with ``n`` a unit Gaussian.  The update is distributionally exact for any
``dt`` (no Euler error); the stationary distribution has zero mean and
variance ``c tau_c / 2``, and the autocorrelation decays as
``exp(-dt/tau_c)``.

Determinism contract: a process seeded from ``(base_seed, trajectory)``
produces a bit-identical path for a fixed step schedule, independent of
how the steps are grouped into :meth:`OuProcess.path` calls.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

# The delta_e diffusion prescription 4/(T2* tau_c) is quoted with both
# times in microseconds; this reference time converts it to SI.
T2STAR_TIME_UNIT = 1e-6


def diffusion_from_t2star(t2star: float, tau_c: float) -> float:
    """Electric-noise diffusion constant for a target dephasing time.

    The prescription is quoted with times in microseconds:

        c = 1 / (T2*_us * tau_c_us)   [rad^2 / us^3]
        c = 1 / (t2star * tau_c * 1e-6)   in SI [rad^2 / s^3]

    so the stationary standard deviation of delta_e is
    sqrt(1 / (2 T2*_us)) rad/us.  The level splitting within the sensing
    subspace fluctuates at 2 delta_e, so in the quasi-static limit an
    undriven |+1>/|-1> superposition dephases as exp(-t^2 / (T2* x 1 us)),
    with a 1/e time that tracks T2* in the microsecond regime; the same
    strength reproduces the published coherence-time grid used by
    :mod:`zfmag.analysis` (see ``REFERENCE_T2_US``).
    """
    if t2star <= 0 or tau_c <= 0:
        raise ValueError("t2star and tau_c must be positive")
    return 1.0 / (t2star * tau_c * T2STAR_TIME_UNIT)


def diffusion_from_relative_error(eta: float, omega: float, tau: float) -> float:
    """Diffusion constant c = 2 eta^2 omega^2 / tau for a drive-error channel.

    Parameterised so the stationary standard deviation of the *absolute*
    Rabi-frequency error is ``eta * omega``.
    """
    if eta < 0:
        raise ValueError("relative error must be >= 0")
    if omega <= 0 or tau <= 0:
        raise ValueError("omega and tau must be positive")
    return 2.0 * eta**2 * omega**2 / tau


@dataclass(frozen=True)
class OuParams:
    """Correlation time (s), diffusion constant and RNG seed material."""

    tau_c: float
    diffusion: float
    seed: object = None

    def __post_init__(self):
        if self.tau_c <= 0:
            raise ValueError("tau_c must be positive")
        if self.diffusion < 0:
            raise ValueError("diffusion must be >= 0")

    @property
    def stationary_std(self) -> float:
        return float(np.sqrt(self.diffusion * self.tau_c / 2.0))


class OuProcess:
    """Single-owner mutable OU channel with exact updates.

    Parameters
    ----------
    params : OuParams
    stationary_start : bool
        Draw the initial value from the stationary distribution instead
        of starting at zero.  Environmental channels default to True,
        control-drift channels to False (a run starts freshly calibrated).
    frozen : bool
        Quasi-static mode: the initial value is held for the whole path.
    """

    def __init__(self, params: OuParams, stationary_start=True, frozen=False):
        self.params = params
        self.rng = np.random.default_rng(params.seed)
        self.frozen = frozen
        if stationary_start or frozen:
            self.current = self.params.stationary_std * self.rng.standard_normal()
        else:
            self.current = 0.0

    def _coefficients(self, dt):
        a = np.exp(-dt / self.params.tau_c)
        b = self.params.stationary_std * np.sqrt(1.0 - a * a)
        return a, b

    def step(self, dt: float) -> float:
        """Advance by dt with one Gaussian draw; returns the new value."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        if self.frozen:
            return self.current
        a, b = self._coefficients(dt)
        self.current = self.current * a + b * self.rng.standard_normal()
        return self.current

    def path(self, n_steps: int, dt: float) -> np.ndarray:
        """Values after each of ``n_steps`` uniform steps of length dt.

        Bit-identical to calling :meth:`step` n times (the linear
        recurrence is evaluated with the same operation order).
        """
        if n_steps == 0:
            return np.empty(0)
        if self.frozen:
            return np.full(n_steps, self.current)
        a, b = self._coefficients(dt)
        draws = self.rng.standard_normal(n_steps)
        values = lfilter([b], [1.0, -a], draws, zi=np.array([a * self.current]))[0]
        self.current = values[-1]
        return values


# Default channel timescales (seconds).
DEFAULT_TAU_C = 20e-6
DEFAULT_TAU_DRIVE = 500e-6


@dataclass(frozen=True)
class NoiseConfig:
    """Strengths and timescales of the three noise channels.

    ``t2star`` of None (or ``eta_* = 0``) switches a channel off.
    """

    t2star: float | None = None
    tau_c: float = DEFAULT_TAU_C
    eta_r: float = 0.0
    tau_r: float = DEFAULT_TAU_DRIVE
    eta_m: float = 0.0
    tau_m: float = DEFAULT_TAU_DRIVE
    stationary_start_delta_e: bool = True
    stationary_start_eta: bool = False
    quasi_static_eta: bool = False

    def delta_e_diffusion(self):
        if self.t2star is None:
            return 0.0
        return diffusion_from_t2star(self.t2star, self.tau_c)

    def delta_e_std(self):
        return float(np.sqrt(self.delta_e_diffusion() * self.tau_c / 2.0))


class NoiseChannelSet:
    """The three independent channels owned by one trajectory worker."""

    def __init__(self, delta_e: OuProcess, eta_r: OuProcess, eta_m: OuProcess):
        self.delta_e = delta_e
        self.eta_r = eta_r
        self.eta_m = eta_m

    @classmethod
    def for_trajectory(cls, config: NoiseConfig, base_seed: int, index: int):
        """Channels whose paths are a pure function of (base_seed, index)."""
        root = np.random.SeedSequence(entropy=(int(base_seed), int(index)))
        seeds = root.spawn(3)
        delta_e = OuProcess(
            OuParams(config.tau_c, config.delta_e_diffusion(), seeds[0]),
            stationary_start=config.stationary_start_delta_e)
        # Relative-error channels carry eta directly (stationary std = eta),
        # equivalent to diffusion_from_relative_error scaled by 1/omega^2.
        eta_r = OuProcess(
            OuParams(config.tau_r, 2.0 * config.eta_r**2 / config.tau_r, seeds[1]),
            stationary_start=config.stationary_start_eta,
            frozen=config.quasi_static_eta)
        eta_m = OuProcess(
            OuParams(config.tau_m, 2.0 * config.eta_m**2 / config.tau_m, seeds[2]),
            stationary_start=config.stationary_start_eta,
            frozen=config.quasi_static_eta)
        return cls(delta_e, eta_r, eta_m)

    def channels(self):
        return (self.delta_e, self.eta_r, self.eta_m)


def dump_noise_csv(path, channel_set: NoiseChannelSet, n_steps: int, dt: float):
    """Diagnostic dump of one joint path as CSV (t, delta_e, eta_r, eta_m)."""
    cols = [proc.path(n_steps, dt) for proc in channel_set.channels()]
    t = np.arange(1, n_steps + 1) * dt
    data = np.column_stack([t] + cols)
    header = "t_s,delta_e_rad_per_s,eta_r,eta_m"
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
