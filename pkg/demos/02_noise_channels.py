"""The three Ornstein-Uhlenbeck noise channels of a trajectory.

The electric channel's strength comes from the dephasing time T2*; the
drive-amplitude channels start at zero (a freshly calibrated run) and
drift on a 500 us timescale.  The exact update keeps the statistics
correct for any step size.
"""

import numpy as np

import zfmag as z

cfg = z.NoiseConfig(t2star=z.us(1.8), eta_r=0.005, eta_m=0.005)
print(f"delta_e stationary std: {cfg.delta_e_std() / z.mhz(1):.4f} (2pi MHz), "
      f"tau_c = {z.to_us(cfg.tau_c):.0f} us")

channels = z.NoiseChannelSet.for_trajectory(cfg, base_seed=2024, index=0)
z.dump_noise_csv("02_noise_path.csv", channels, n_steps=20000, dt=z.us(0.05))
print("dumped a 1 ms joint path to 02_noise_path.csv")

# statistics of a fresh channel
proc = z.OuProcess(z.OuParams(cfg.tau_c, cfg.delta_e_diffusion(), seed=5))
path = proc.path(100_000, cfg.tau_c / 10)
print(f"sample variance / (c tau_c / 2) = "
      f"{np.var(path) / proc.params.stationary_std**2:.3f}  (expect ~1)")

lag = 10  # one correlation time at dt = tau_c / 10
rho = np.corrcoef(path[:-lag], path[lag:])[0, 1]
print(f"autocorrelation at one tau_c: {rho:.3f}  (expect ~{np.exp(-1):.3f})")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = np.loadtxt("02_noise_path.csv", delimiter=",", skiprows=1)
    fig, axes = plt.subplots(3, 1, figsize=(6, 5), sharex=True)
    for ax, col, label in zip(axes, (1, 2, 3),
                              ("delta_e (rad/s)", "eta_r", "eta_m")):
        ax.plot(data[:, 0] * 1e6, data[:, col], lw=0.5)
        ax.set_ylabel(label)
    axes[-1].set_xlabel("t (us)")
    fig.tight_layout()
    fig.savefig("02_noise_channels.png", dpi=120)
    print("saved 02_noise_channels.png")
except ImportError:
    pass
