"""Microring transmission model and resonance fitting.

The all-pass ring dip is modelled as a Lorentzian in optical frequency::

    T(nu) = 1 - (1 - T_min) * (dnu/2)**2 / ((nu - nu0)**2 + (dnu/2)**2)

with ``dnu`` the full width at half depth.  Fits run in frequency; traces
recorded against wavelength are converted first.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from ._lm import levenberg_marquardt
from .errors import DegenerateDataError, DomainError, FitError
from .quantities import SPEED_OF_LIGHT, wavelength_to_frequency


@dataclass(frozen=True)
class Resonance:
    center: float          # Hz
    linewidth: float       # FWHM, Hz
    t_min: float = 0.0     # on-resonance transmission

    def __post_init__(self):
        if not self.linewidth > 0:
            raise DomainError("linewidth must be positive")
        if not 0.0 <= self.t_min < 1.0:
            raise DomainError("t_min must lie in [0, 1)")
        if not self.center > 0:
            raise DomainError("center frequency must be positive")

    @property
    def q(self):
        return q_factor(self)


@dataclass(frozen=True)
class RingGeometry:
    radius: float          # m
    group_index: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("radius must be positive")
        if not self.group_index > 0:
            raise DomainError("group index must be positive")


def transmission(res, nu):
    """Lorentzian dip transmission at frequency ``nu`` (scalar or array)."""
    nu = np.asarray(nu, dtype=float)
    hw2 = (0.5 * res.linewidth) ** 2
    out = 1.0 - (1.0 - res.t_min) * hw2 / ((nu - res.center) ** 2 + hw2)
    return out if out.ndim else float(out)


def q_factor(res):
    """Loaded quality factor, center / FWHM."""
    return res.center / res.linewidth


def free_spectral_range(geom):
    """FSR in Hz of a ring of the given radius and group index."""
    return SPEED_OF_LIGHT / (2.0 * math.pi * geom.radius * geom.group_index)


@dataclass
class ResonanceFit:
    resonance: Resonance
    stderr: dict            # keys: center, linewidth, t_min
    rms: float
    iterations: int

    @property
    def q(self):
        return q_factor(self.resonance)

    @property
    def q_stderr(self):
        r = self.resonance
        rel = math.hypot(self.stderr["center"] / r.center, self.stderr["linewidth"] / r.linewidth)
        return self.q * rel


def _initial_guess(nu, t):
    i0 = int(np.argmin(t))
    if i0 == 0 or i0 == len(t) - 1:
        raise DegenerateDataError("transmission minimum lies on the edge of the trace; no dip bracketed")
    t_min = float(t[i0])
    baseline = 1.0
    if t_min > 0.98:
        raise DegenerateDataError("no resonance dip deeper than 2% found")
    half = 0.5 * (baseline + t_min)

    def crossing(idx):
        # walk away from the minimum until transmission rises past half depth
        for k in idx:
            j = k - 1 if idx.step > 0 else k + 1
            if t[k] >= half:
                # linear interpolation between j (below) and k (above)
                return nu[j] + (half - t[j]) * (nu[k] - nu[j]) / (t[k] - t[j])
        return None

    left = crossing(range(i0 - 1, -1, -1))
    right = crossing(range(i0 + 1, len(t)))
    if left is None or right is None:
        raise DegenerateDataError("trace does not span the dip's half-depth points on both sides")
    return float(nu[i0]), float(right - left), min(max(t_min, 0.0), 0.99)


def fit_resonance(frequency, transmission_values, max_iter=200, xtol=1e-9):
    """Least-squares Lorentzian fit of a transmission trace.

    Parameters
    ----------
    frequency : array_like
        Optical frequencies in Hz, any order.
    transmission_values : array_like
        Normalised transmission, nominally in [0, 1].

    Returns
    -------
    ResonanceFit
        Best-fit resonance, 1-sigma errors scaled by the residual variance,
        and the residual RMS.

    Raises
    ------
    DegenerateDataError
        Fewer than 8 samples, values far outside [0, 1.2], or no bracketed dip.
    FitError
        No convergence within ``max_iter`` iterations.
    """
    nu = np.asarray(frequency, dtype=float)
    t = np.asarray(transmission_values, dtype=float)
    if nu.shape != t.shape or nu.ndim != 1:
        raise DegenerateDataError("frequency and transmission must be 1-D arrays of equal length")
    if len(nu) < 8:
        raise DegenerateDataError(f"need at least 8 samples, got {len(nu)}")
    if np.any(t < -0.05) or np.any(t > 1.2):
        raise DegenerateDataError("transmission values outside [0, 1.2]")
    order = np.argsort(nu)
    nu, t = nu[order], t[order]

    c0, w0, tmin0 = _initial_guess(nu, t)
    if nu[-1] - nu[0] < 2.0 * w0:
        raise DegenerateDataError("trace spans less than twice the dip FWHM")

    # work in units of the guessed linewidth, centred on the guessed minimum
    scale = w0
    x = (nu - c0) / scale

    def model_parts(p):
        u0, w, tmin = p
        dx = x - u0
        hw = 0.5 * w
        D = dx * dx + hw * hw
        return dx, hw, D, 1.0 - tmin

    def residuals(p):
        dx, hw, D, d = model_parts(p)
        return 1.0 - d * hw * hw / D - t

    def jacobian(p):
        dx, hw, D, d = model_parts(p)
        D2 = D * D
        return np.column_stack([
            -2.0 * dx * d * hw * hw / D2,
            -d * hw * dx * dx / D2,
            hw * hw / D,
        ])

    try:
        res = levenberg_marquardt(residuals, jacobian, [0.0, 1.0, tmin0],
                                  max_iter=max_iter, xtol=xtol, typical=[1.0, 1.0, 1e-3])
    except FitError as exc:
        u0, w, tmin = exc.best
        exc.best = {"center": c0 + u0 * scale, "linewidth": abs(w) * scale, "t_min": tmin}
        raise
    u0, w, tmin = res.params
    su, sw, st = res.stderr
    resonance = Resonance(float(c0 + u0 * scale), float(abs(w) * scale),
                          float(min(max(tmin, 0.0), 1.0 - 1e-12)))
    rms = float(np.sqrt(res.chi2 / len(t)))
    stderr = {"center": float(su * scale), "linewidth": float(sw * scale), "t_min": float(st)}
    return ResonanceFit(resonance, stderr, rms, res.iterations)


def read_trace(path):
    """Read a transmission trace CSV.

    The header is either ``frequency_hz,transmission`` or
    ``wavelength_nm,transmission``; lines starting with ``#`` are skipped.
    Returns ``(frequency_hz, transmission)`` arrays.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(line for line in fh if line.strip() and not line.lstrip().startswith("#"))]
    if not rows:
        raise DegenerateDataError(f"{path}: empty trace")
    header = [h.strip() for h in rows[0]]
    if header[:2] == ["frequency_hz", "transmission"]:
        wavelength = False
    elif header[:2] == ["wavelength_nm", "transmission"]:
        wavelength = True
    else:
        raise DegenerateDataError(f"{path}: unrecognised header {header!r}")
    data = np.array([[float(v) for v in r[:2]] for r in rows[1:]], dtype=float)
    x, t = data[:, 0], data[:, 1]
    freq = wavelength_to_frequency(x * 1e-9) if wavelength else x
    return np.asarray(freq, dtype=float), t


def write_trace(path, frequency, transmission_values, comment=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("frequency_hz,transmission\n")
        for f, v in zip(frequency, transmission_values):
            fh.write(f"{f:.6f},{v:.9f}\n")
