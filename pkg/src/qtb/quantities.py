"""Unit conventions and the ITU-T DWDM frequency grid.

Every physical value in qtb is a plain float in SI units (Hz, m, s, W)
except where a name says otherwise (``power_mw``).  Timestamps inside tag
streams are integer picoseconds.
"""
import math
import re

import numpy as np

from .errors import DomainError

#: speed of light in vacuum, m/s (exact SI value)
SPEED_OF_LIGHT = 299_792_458.0

#: ITU-T G.694.1 C-band: channel n sits at 190 THz + n * 100 GHz
ITU_C_BASE_HZ = 190.0e12
ITU_C_SPACING_HZ = 100.0e9
ITU_C_CHANNELS = range(1, 73)

PS_PER_S = 10**12


def wavelength_to_frequency(wavelength):
    """Vacuum wavelength (m) to optical frequency (Hz)."""
    if np.any(~(np.asarray(wavelength) > 0)):
        raise DomainError(f"wavelength must be positive, got {wavelength!r}")
    return SPEED_OF_LIGHT / wavelength


def frequency_to_wavelength(frequency):
    """Optical frequency (Hz) to vacuum wavelength (m)."""
    if np.any(~(np.asarray(frequency) > 0)):
        raise DomainError(f"frequency must be positive, got {frequency!r}")
    return SPEED_OF_LIGHT / frequency


def itu_c_channel_center(n):
    """Center frequency (Hz) of ITU 100-GHz grid channel ``C<n>``."""
    if int(n) != n or n not in ITU_C_CHANNELS:
        raise DomainError(f"ITU C-band channel index must be in 1..72, got {n!r}")
    return ITU_C_BASE_HZ + int(n) * ITU_C_SPACING_HZ


def is_telecom_wavelength(wavelength):
    return 1.0e-6 < wavelength < 2.0e-6


# power ---------------------------------------------------------------------

def mw_to_w(p_mw):
    return p_mw * 1e-3


def w_to_mw(p_w):
    return p_w * 1e3


def mw_to_dbm(p_mw):
    if not p_mw > 0:
        raise DomainError("dBm is undefined for non-positive power")
    return 10.0 * math.log10(p_mw)


def dbm_to_mw(p_dbm):
    return 10.0 ** (p_dbm / 10.0)


def db_to_ratio(db):
    """Loss in dB (positive = loss) to a transmission factor in (0, 1]."""
    return 10.0 ** (-db / 10.0)


def ratio_to_db(ratio):
    if not ratio > 0:
        raise DomainError("ratio must be positive")
    return -10.0 * math.log10(ratio)


# time ----------------------------------------------------------------------

_SI_TIME = {"ps": 1e-12, "ns": 1e-9, "us": 1e-6, "µs": 1e-6, "ms": 1e-3, "s": 1.0}
_TIME_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(ps|ns|us|µs|ms|s)?\s*$")


def parse_time(text):
    """Parse ``"1.25ns"``, ``"300 ps"`` or a bare number of seconds."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _TIME_RE.match(text)
    if m is None:
        raise DomainError(f"cannot parse time value {text!r}")
    value, unit = m.groups()
    return float(value) * _SI_TIME[unit or "s"]


def seconds_to_ps(t):
    """Seconds to the nearest integer picosecond."""
    return int(round(t * PS_PER_S))


def ps_to_seconds(t_ps):
    return t_ps / PS_PER_S
