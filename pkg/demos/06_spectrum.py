"""Sensing spectrum: scan the signal frequency across a locked filter.

The sequence is scheduled for a (2pi) 0.1 MHz detuning and the signal
frequency is swept around it.  On resonance the accumulated phase pulls
the end-point contrast up; off resonance the phase beats away and the
contrast stays at the decayed background, so the scan peaks at the
filter frequency with a Fourier-limited width ~ 1/T.
"""

import os

import numpy as np

import zfmag as z
from zfmag.analysis import spectrum_scan

sensor = z.SensorParams(d=z.ghz(2.87), ex=z.mhz(5.0))
drive = z.DriveConfig.resonant(sensor, rf_rabi=z.mhz(6.0), mw_rabi=z.mhz(40))
noise = z.NoiseConfig(t2star=z.us(1.8), eta_r=0.005, eta_m=0.005)

center = z.khz(100)
detunings = center + np.linspace(-z.khz(40), z.khz(40), 17)
scan = spectrum_scan(sensor, drive, z.khz(5), detunings, center, noise=noise,
                     n_realizations=40, base_seed=99,
                     workers=min(os.cpu_count() or 1, 4))

print(f"interrogation time {z.to_us(scan.total_time):.1f} us")
print(" detuning (2pi kHz)   contrast")
for dw, c, se in zip(scan.detunings, scan.contrast, scan.stderr):
    bar = "#" * max(0, int(30 * (c - scan.contrast.min())
                           / max(np.ptp(scan.contrast), 1e-9)))
    print(f"   {dw / z.khz(1):7.1f}       {c:+.3f} +- {se:.3f}  {bar}")
print(f"peak at (2pi) {scan.peak_detuning() / z.khz(1):.1f} kHz "
      f"(filter set to {center / z.khz(1):.1f})")
scan.write_csv("06_spectrum.csv")
print("wrote 06_spectrum.csv")
