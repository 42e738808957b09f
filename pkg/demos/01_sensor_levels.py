"""Static level structure of a spin-1 clock sensor.

The transverse splitting opens an avoided crossing of width 2 Ex between
the |+-1> levels at zero field, and the upper branch is flat there
(dE/dB -> 0): the clock-transition property that protects the sensor
from first-order magnetic noise.
"""

import numpy as np

import zfmag as z

sensor = z.SensorParams(d=z.ghz(2.87), ex=z.mhz(8.0))

es = z.eigensystem(sensor)
print(f"transverse splitting Ex = (2pi) {z.to_mhz(sensor.ex):.1f} MHz")
print(f"zero-field gap E+ - E- = (2pi) "
      f"{z.to_mhz(es.energies[0] - es.energies[2]):.1f} MHz")
print(f"|psi_+> = {np.round(es.states[0], 4)}  "
      "(the (|+1> + |-1>)/sqrt(2) clock state)")

grid = np.linspace(-z.mhz(40), z.mhz(40), 401)
scan = z.energy_vs_field_scan(sensor, grid)

# flatness at zero field: central finite-difference slope
h = 1e-4 * sensor.ex
slope = (z.energy_vs_field_scan(sensor, [h])[0, 1]
         - z.energy_vs_field_scan(sensor, [-h])[0, 1]) / (2 * h)
print(f"clock-transition slope dE+/dB at B = 0: {slope:.2e} (dimensionless)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for col, label in ((1, "E+"), (2, "E-")):
        ax.plot(scan[:, 0] / z.mhz(1), (scan[:, col] - sensor.d) / z.mhz(1),
                label=label)
    ax.set_xlabel("field offset (2pi MHz)")
    ax.set_ylabel("energy - D (2pi MHz)")
    ax.legend()
    fig.tight_layout()
    fig.savefig("01_sensor_levels.png", dpi=120)
    print("saved 01_sensor_levels.png")
except ImportError:
    pass
