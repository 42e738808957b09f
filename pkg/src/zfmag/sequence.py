"""Pulse sequences, resonance scheduling and the +-1 response function.

The canonical decoupling layout for n pulses is

    tau -- (pulse -- 2 tau)^(n-1) -- pulse -- tau

so the total free-evolution time is 2 n tau and the total duration is
2 n tau + n T_p.  The response function f(t) flips between +1 and -1 at
the pulse centers; in the zero-pulse-length idealisation it is the square
wave  +1 on (0, tau), -1 on (tau, 3 tau), ... with period T = 4 tau.

Locking the pulse spacing to a target detuning dw via tau = pi / (2 dw)
(i.e. tau = T/4 with T the filter period) makes f(t) cos(dw t) = |cos(dw t)|,
so the signal phase grows secularly while slow noise is refocused.

Built-in phase families:

* ``cpmg`` / ``dd`` -- all pulses along the same axis (phase 0);
* ``ldd8b`` -- an 8-pulse quadratic phase ramp (repeated for larger n)
  whose per-repetition phase factors sum to zero, cancelling the leading
  pulse-amplitude error when the inter-pulse RF phase is a multiple of
  2 pi.  The pattern is a configurable preset, not a law of nature; pass
  explicit ``phases`` to study alternatives.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

FREE = "free"
PULSE = "pulse"

# Default 8-pulse robust preset.  Within each repetition the phase factors
# sum to zero (cancelling the leading drive-amplitude error when the
# inter-pulse drive phase is a multiple of 2 pi) and the list was selected
# by a coherent per-supercycle error search plus Monte Carlo validation
# against the reference coherence grid.  It is a configurable preset, not
# a canonical sequence; pass explicit phases to study alternatives.
LDD8B_PHASES = tuple(f * math.pi for f in
                     (0.0, 0.25, 0.25, 1.75, 1.25, 1.25, 1.0, 0.75))

FAMILIES = ("none", "cpmg", "dd", "ldd8b")


@dataclass(frozen=True)
class Segment:
    kind: str
    duration: float
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in (FREE, PULSE):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.duration < 0:
            raise ValueError("segment duration must be >= 0")


@dataclass(frozen=True)
class PulseSequence:
    """Ordered free / pulse segments plus scheduling metadata."""

    segments: tuple
    n_pulses: int
    tau: float
    pulse_duration: float
    label: str
    phases: tuple = ()
    center_timing: bool = False

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def total_free_time(self) -> float:
        return sum(s.duration for s in self.segments if s.kind == FREE)

    @property
    def cycle_duration(self) -> float:
        """Duration of one filter period (two pulses worth of the train)."""
        if self.n_pulses >= 2 and self.n_pulses % 2 == 0:
            return 2.0 * self.total_duration / self.n_pulses
        return self.total_duration

    def to_dict(self) -> dict:
        return {"family": self.label, "n_pulses": self.n_pulses,
                "tau": self.tau, "pulse_duration": self.pulse_duration,
                "phases": list(self.phases),
                "center_timing": self.center_timing}

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def sequence_from_dict(d: dict) -> "PulseSequence":
    return build_sequence(d["family"], d["n_pulses"], d["tau"],
                          d["pulse_duration"],
                          phases=d.get("phases") or None,
                          center_timing=d.get("center_timing", False))


def sequence_from_text(text: str) -> "PulseSequence":
    return sequence_from_dict(json.loads(text))


def resonance_tau(delta_omega: float) -> float:
    """Pulse spacing tau = pi / (2 dw) locking the filter to detuning dw."""
    if delta_omega <= 0:
        raise ValueError(
            f"detuning must be positive, got {delta_omega}; off-resonant "
            "scheduling must be set up explicitly")
    return math.pi / (2.0 * delta_omega)


def build_sequence(family: str, n_pulses: int, tau: float,
                   pulse_duration: float, phases=None,
                   center_timing: bool = False) -> PulseSequence:
    """Construct the canonical layout with per-pulse phases.

    ``phases`` must have a length dividing ``n_pulses``; the pattern
    repeats.  Families "cpmg"/"dd" default to all-zero phases, "ldd8b" to
    the 8-pulse preset, "none" to pure free evolution of duration
    2 * n_pulses * tau (the free time its pulsed counterpart would have).
    Unknown families require explicit phases.

    With ``center_timing`` the free gaps are shortened so the pulse
    *centers* sit exactly on the tau, 3 tau, 5 tau, ... grid (free
    segments of tau - T_p/2 at the edges and 2 tau - T_p inside).  The
    plain layout keeps full tau / 2 tau free gaps, which lets the filter
    period drift off the signal by T_p per pulse; center timing holds the
    resonance lock exactly over arbitrarily long trains, which is how a
    frequency-locked experiment would program the spacing.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    family = family.lower()

    if family == "none":
        seg = Segment(FREE, 2.0 * n_pulses * tau)
        return PulseSequence(segments=(seg,), n_pulses=0, tau=tau,
                             pulse_duration=0.0, label="none")

    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    if pulse_duration < 0:
        raise ValueError("pulse_duration must be >= 0")
    if center_timing and pulse_duration > tau:
        raise ValueError("center timing requires pulse_duration <= tau")

    if phases is None:
        if family in ("cpmg", "dd"):
            phases = (0.0,)
        elif family == "ldd8b":
            phases = LDD8B_PHASES
        else:
            raise ValueError(
                f"unknown family {family!r}: supply an explicit phase list")
    phases = tuple(float(p) for p in phases)
    if n_pulses % len(phases) != 0:
        raise ValueError(
            f"phase pattern of length {len(phases)} does not divide "
            f"n_pulses = {n_pulses}")

    edge = tau - pulse_duration / 2.0 if center_timing else tau
    inner = 2.0 * tau - pulse_duration if center_timing else 2.0 * tau
    segs = [Segment(FREE, edge)]
    for k in range(n_pulses):
        segs.append(Segment(PULSE, pulse_duration, phases[k % len(phases)]))
        segs.append(Segment(FREE, edge if k == n_pulses - 1 else inner))
    return PulseSequence(segments=tuple(segs), n_pulses=n_pulses, tau=tau,
                         pulse_duration=pulse_duration, label=family,
                         phases=phases, center_timing=center_timing)


@dataclass(frozen=True)
class ResponseFunction:
    """Piecewise +-1 toggling sign with flips at the pulse centers."""

    flip_times: np.ndarray
    total_duration: float

    def value(self, t):
        """f(t) for scalar or array t; f(0) = +1, flips at each flip time."""
        idx = np.searchsorted(self.flip_times, np.asarray(t), side="right")
        return np.where(idx % 2 == 0, 1.0, -1.0)

    def integral(self, t: float) -> float:
        """integral of f from 0 to t (t within the sequence)."""
        edges = np.concatenate([[0.0], self.flip_times, [self.total_duration]])
        acc = 0.0
        sign = 1.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            if t <= lo:
                break
            acc += sign * (min(t, hi) - lo)
            sign = -sign
        return acc

    def signal_phase(self, g_ac: float, delta_omega: float, t: float) -> float:
        """g_ac * integral of f(u) cos(dw u) du from 0 to t, exact timing."""
        edges = np.concatenate([[0.0], self.flip_times, [self.total_duration]])
        acc = 0.0
        sign = 1.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            if t <= lo:
                break
            hi = min(t, hi)
            acc += sign * (np.sin(delta_omega * hi) - np.sin(delta_omega * lo))
            sign = -sign
        return g_ac * acc / delta_omega


def response_function(seq: PulseSequence) -> ResponseFunction:
    """Response function of a canonical sequence (flips at pulse centers)."""
    flips = []
    t = 0.0
    for seg in seq.segments:
        if seg.kind == PULSE:
            flips.append(t + seg.duration / 2.0)
        t += seg.duration
    return ResponseFunction(flip_times=np.array(flips), total_duration=t)


def ideal_response(tau: float, n_pulses: int = 2) -> ResponseFunction:
    """Zero-pulse-length idealisation: flips at tau, 3 tau, 5 tau, ..."""
    seq = build_sequence("cpmg", n_pulses, tau, 0.0)
    return response_function(seq)


def fourier_coefficient(seq: PulseSequence, n: int) -> float:
    """Cosine-series coefficient a_n of the idealised square-wave response.

    For f with period T = 4 tau, +1 on (0, tau), -1 on (tau, 3 tau), ...
    (even about t = 0), the series f = sum_n a_n cos(2 pi n t / T) has

        a_n = (4 / (n pi)) * (-1)^((n-1)/2)   for odd n,   0 for even n

    so the fundamental carries amplitude 4/pi and on resonance the secular
    signal rate is a_1 / 2 = 2/pi, consistent with the accumulated phase
    integral of |cos|.
    """
    if n < 1:
        raise ValueError("harmonic index must be >= 1")
    if n % 2 == 0:
        return 0.0
    return (4.0 / (n * math.pi)) * (-1.0) ** ((n - 1) // 2)


def fourier_coefficient_numeric(response: ResponseFunction, n: int,
                                period: float) -> float:
    """Quadrature estimate (2/T) * integral_0^T f(t) cos(2 pi n t / T) dt.

    Independent numeric oracle for :func:`fourier_coefficient`; integrates
    the actual piecewise response with the flip times as breakpoints.
    """
    from scipy.integrate import quad

    w = 2.0 * math.pi * n / period
    pts = [ft for ft in response.flip_times if ft < period]
    val, _ = quad(lambda t: float(response.value(t)) * math.cos(w * t),
                  0.0, period, points=pts, limit=200)
    return 2.0 * val / period


def accumulated_phase(g_ac: float, delta_omega: float, t: float) -> float:
    """Resonantly accumulated signal phase eta(t) = g_ac * int_0^t |cos(dw u)| du.

    Closed form of the idealised on-resonance prediction: with the filter
    locked to dw the toggling sign equals sign(cos(dw t)), so the phase
    grows at mean rate (2/pi) g_ac and the |+> population follows
    (1 + cos(eta)) / 2 at the refocusing points.
    """
    if delta_omega <= 0:
        raise ValueError("delta_omega must be positive")
    x = delta_omega * t
    m = math.floor(x / math.pi)
    r = x - m * math.pi
    partial = math.sin(r) if r <= math.pi / 2 else 2.0 - math.sin(r)
    return g_ac * (2.0 * m + partial) / delta_omega
