"""Noise-free sensing: the |+> population follows (1 + cos eta(t)) / 2.

A single trajectory with all noise off, decoupling locked to the signal
detuning.  At the refocusing points the drive phase cancels and only the
resonantly accumulated signal phase eta(t) remains.
"""

import numpy as np

import zfmag as z
from zfmag.engine import IntegratorConfig, run_trajectory

sensor = z.SensorParams(d=z.ghz(2.87), ex=z.khz(300))
drive = z.DriveConfig.resonant(sensor, rf_rabi=z.khz(100), mw_rabi=z.mhz(40))
g, dw = z.khz(5), z.khz(100)
signal = z.SignalConfig.detuned(sensor, g, dw)

tau = z.resonance_tau(dw)
seq = z.build_sequence("cpmg", 40, tau, 2 * np.pi / drive.mw_rabi,
                       center_timing=True)

channels = z.NoiseChannelSet.for_trajectory(z.NoiseConfig(), 1, 0)
traj = run_trajectory(sensor, drive, signal, seq, channels,
                      IntegratorConfig())

pred = 0.5 * (1 + np.cos([z.accumulated_phase(g, dw, t) for t in traj.times]))
dev = np.abs(traj.p_plus - pred)
print(f"window {z.to_us(traj.times[-1]):.0f} us, {len(traj.times)} samples")
print(f"max |P+ - (1 + cos eta)/2| = {dev.max():.4f}")
for k in range(0, len(traj.times), 8):
    print(f"  t = {z.to_us(traj.times[k]):6.1f} us   P+ = "
          f"{traj.p_plus[k]:.4f}   predicted {pred[k]:.4f}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(traj.times * 1e6, traj.p_plus, "o", ms=3, label="simulated")
    tt = np.linspace(0, traj.times[-1], 400)
    ax.plot(tt * 1e6, 0.5 * (1 + np.cos([z.accumulated_phase(g, dw, t)
                                         for t in tt])),
            "-", lw=1, label="(1 + cos eta)/2")
    ax.set_xlabel("t (us)")
    ax.set_ylabel("P+")
    ax.legend()
    fig.tight_layout()
    fig.savefig("04_signal_oscillation.png", dpi=120)
    print("saved 04_signal_oscillation.png")
except ImportError:
    pass
