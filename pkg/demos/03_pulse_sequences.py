"""Pulse trains, the +-1 response function and its frequency filter.

Locking the spacing to a target detuning via tau = pi / (2 dw) makes the
toggling sign track sign(cos(dw t)), so the signal phase accumulates at
the mean rate (2/pi) g while slow noise refocuses.  The square-wave
filter has cosine coefficients 4/(n pi) (alternating sign) on the odd
harmonics.
"""

import numpy as np

import zfmag as z

dw = z.khz(100)
tau = z.resonance_tau(dw)
print(f"detuning (2pi) 0.1 MHz  ->  tau = {z.to_us(tau):.2f} us, "
      f"filter period {z.to_us(4 * tau):.1f} us")

seq = z.build_sequence("ldd8b", 8, tau, z.ns(25), center_timing=True)
print("ldd8b phase preset (units of pi):",
      [round(p / np.pi, 2) for p in seq.phases])
print(f"total duration {z.to_us(seq.total_duration):.2f} us "
      f"({seq.n_pulses} pulses, cycle {z.to_us(seq.cycle_duration):.1f} us)")

resp = z.response_function(seq)
print("flip times (us):", np.round(resp.flip_times * 1e6, 3))

print("\n n   closed form   quadrature")
ideal = z.ideal_response(tau)
for n in range(1, 8):
    closed = z.fourier_coefficient(seq, n)
    quad = z.fourier_coefficient_numeric(ideal, n, 4 * tau)
    print(f"{n:2d}  {closed:+.6f}   {quad:+.6f}")

# resonant phase accumulation: exact flip-time integral vs closed form
g = z.khz(5)
for t_us in (25, 50, 100):
    exact = resp.signal_phase(g, dw, z.us(t_us)) if t_us <= 40 else None
    ideal_eta = z.accumulated_phase(g, dw, z.us(t_us))
    line = f"eta({t_us:3d} us) = {ideal_eta:.4f} rad (closed form)"
    if exact is not None:
        line += f", {exact:.4f} (sequence flip times)"
    print(line)
