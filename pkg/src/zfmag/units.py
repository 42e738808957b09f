"""Angular-frequency and time unit helpers.

All frequencies in this package are angular frequencies in rad/s and all
times are in seconds.  Experimental parameters are usually quoted as
"(2pi) x MHz", so these helpers make configs read like the lab notebook:

    >>> rf_rabi = mhz(4.0)      # (2pi) * 4 MHz  ->  rad/s
    >>> tau = us(2.5)           # 2.5 us         ->  s
"""

import math

TWO_PI = 2.0 * math.pi


def ghz(f):
    """(2pi) x f GHz as angular frequency in rad/s."""
    return TWO_PI * 1e9 * f


def mhz(f):
    """(2pi) x f MHz as angular frequency in rad/s."""
    return TWO_PI * 1e6 * f


def khz(f):
    """(2pi) x f kHz as angular frequency in rad/s."""
    return TWO_PI * 1e3 * f


def us(t):
    """t microseconds in seconds."""
    return 1e-6 * t


def ns(t):
    """t nanoseconds in seconds."""
    return 1e-9 * t


def to_mhz(w):
    """Angular frequency in rad/s back to MHz (w / 2pi / 1e6)."""
    return w / TWO_PI / 1e6


def to_us(t):
    """Seconds back to microseconds."""
    return t * 1e6
