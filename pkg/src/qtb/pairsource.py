"""Rate-level model of a cavity SFWM photon-pair source.

Power is in mW throughout this module (the singles coefficients are quoted
per mW and per mW squared); rates are in counts per second.
"""
import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._lm import levenberg_marquardt
from .errors import (DegenerateDataError, DomainError, FiniteStatisticsWarning, FitError,
                     NoDataError)


@dataclass(frozen=True)
class MaterialWaveguide:
    n2: float                # m^2/W
    a_eff: float             # m^2
    pump_wavelength: float   # m

    def __post_init__(self):
        for name in ("n2", "a_eff", "pump_wavelength"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


def nonlinear_coefficient(mw):
    """Kerr nonlinear parameter gamma = 2 pi n2 / (lambda A_eff), in 1/(W m)."""
    return 2.0 * math.pi * mw.n2 / (mw.pump_wavelength * mw.a_eff)


def brightness_figure_of_merit(mw, radius, linewidth):
    """Relative pair-rate figure of merit n2^2 / (A_eff^2 R^2 dnu^3).

    Only ratios between designs are meaningful; there is no absolute
    calibration behind it.
    """
    if not (radius > 0 and linewidth > 0):
        raise DomainError("radius and linewidth must be positive")
    return mw.n2 ** 2 / (mw.a_eff ** 2 * radius ** 2 * linewidth ** 3)


# singles -------------------------------------------------------------------

@dataclass(frozen=True)
class SinglesModel:
    """R(P) = a P^2 + b P + c with P in mW."""

    a: float     # 1/(s mW^2), SFWM
    b: float     # 1/(s mW), linear noise
    c: float     # 1/s, dark counts

    def __call__(self, power_mw):
        return eval_singles(self, power_mw)

    def sfwm_rate(self, power_mw):
        return self.a * np.asarray(power_mw, float) ** 2


def eval_singles(m, power_mw):
    p = np.asarray(power_mw, dtype=float)
    if np.any(p < 0):
        raise DomainError("pump power must be non-negative")
    out = m.a * p * p + m.b * p + m.c
    return out if out.ndim else float(out)


@dataclass
class SinglesFit:
    model: SinglesModel
    stderr: SinglesModel
    residual_rms: float
    negative_dark: bool


def fit_singles(power_mw, rate, sigma=None):
    """Quadratic fit of singles rate against on-chip pump power.

    Linear least squares in the basis {P^2, P, 1}.  With ``sigma`` (1-sigma
    rate errors) the fit is weighted and errors are absolute; otherwise
    errors come from the residual scatter.  A negative fitted dark term is
    reported through ``negative_dark`` and left as is.
    """
    p = np.asarray(power_mw, dtype=float)
    y = np.asarray(rate, dtype=float)
    if p.shape != y.shape or p.ndim != 1:
        raise DegenerateDataError("power and rate must be 1-D arrays of equal length")
    if np.any(y < 0):
        raise DomainError("rates must be non-negative")
    if len(np.unique(p)) < 3:
        raise DegenerateDataError("need at least 3 distinct pump powers for a quadratic fit")
    X = np.column_stack([p * p, p, np.ones_like(p)])
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    Xw, yw = X * w[:, None], y * w
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = yw - Xw @ coef
    dof = len(y) - 3
    cov = np.linalg.pinv(Xw.T @ Xw)
    if sigma is None:
        cov = cov * (resid @ resid / dof if dof > 0 else np.nan)
    err = np.sqrt(np.abs(np.diag(cov)))
    rms = float(np.sqrt(np.mean((y - X @ coef) ** 2)))
    model = SinglesModel(*map(float, coef))
    return SinglesFit(model, SinglesModel(*map(float, err)), rms, model.c < 0)


def read_power_sweep(path):
    """Read ``power_mw,counts,dwell_s`` CSV; returns (power_mw, rate, rate_sigma)."""
    power, counts, dwell = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.DictReader(line for line in fh if not line.lstrip().startswith("#"))
        for row in rows:
            power.append(float(row["power_mw"]))
            counts.append(float(row["counts"]))
            dwell.append(float(row["dwell_s"]))
    power, counts, dwell = map(np.asarray, (power, counts, dwell))
    if np.any(dwell <= 0):
        raise DomainError(f"{path}: dwell times must be positive")
    return power, counts / dwell, np.sqrt(np.maximum(counts, 1.0)) / dwell


# coincidences --------------------------------------------------------------

@dataclass(frozen=True)
class PairStatistics:
    coincidence_rate: float   # N_cc, 1/s
    accidental_rate: float    # N_acc, 1/s
    window: float = 1e-9      # s

    def __post_init__(self):
        if self.coincidence_rate < 0 or self.accidental_rate < 0:
            raise DomainError("rates must be non-negative")
        if not self.window > 0:
            raise DomainError("window must be positive")


def car(stats):
    """Coincidence-to-accidental ratio N_cc / N_acc.

    Zero accidentals give ``inf`` and a FiniteStatisticsWarning.
    """
    if stats.accidental_rate == 0:
        warnings.warn("no accidental coincidences recorded; CAR is unbounded",
                      FiniteStatisticsWarning, stacklevel=2)
        return math.inf
    return stats.coincidence_rate / stats.accidental_rate


def car_with_error(n_cc, n_acc):
    """CAR and its Poisson 1-sigma error from raw counts in equal dwell."""
    if n_acc <= 0:
        warnings.warn("no accidental coincidences recorded; CAR is unbounded",
                      FiniteStatisticsWarning, stacklevel=2)
        return math.inf, math.inf
    value = n_cc / n_acc
    rel = math.sqrt((1.0 / n_cc if n_cc > 0 else 0.0) + 1.0 / n_acc)
    return value, value * rel


@dataclass
class PgrResult:
    pgr: float                # pairs/s at the given power
    per_mw2: float            # pgr / P^2
    brightness: float = None  # pgr / (P^2 * dnu[GHz]) if a bandwidth was supplied


def infer_pgr(signal, idler, power_mw, stats, bandwidth=None):
    """On-chip pair generation rate from singles and net coincidences.

    ``(a_s P^2)(a_i P^2) / (N_cc - N_acc)``; ``bandwidth`` in Hz adds the
    spectral brightness per GHz.
    """
    if not power_mw > 0:
        raise DomainError("pump power must be positive")
    net = stats.coincidence_rate - stats.accidental_rate
    if net <= 0:
        raise NoDataError("coincidence rate does not exceed the accidental rate")
    p2 = power_mw * power_mw
    pgr = signal.a * p2 * idler.a * p2 / net
    bright = None
    if bandwidth is not None:
        if not bandwidth > 0:
            raise DomainError("bandwidth must be positive")
        bright = pgr / (p2 * bandwidth / 1e9)
    return PgrResult(pgr, pgr / p2, bright)


def mean_pairs_per_pulse(pgr_per_mw2, power_mw, repetition_rate):
    """Mean number of pairs per pump period for a given pair-rate coefficient."""
    return pgr_per_mw2 * power_mw ** 2 / repetition_rate


# coherence time ------------------------------------------------------------

def bandwidth_from_coherence(tau):
    """Lorentzian FWHM (Hz) for an exp(-|dt|/tau) cross-correlation."""
    if not tau > 0:
        raise DomainError("coherence time must be positive")
    return 1.0 / (2.0 * math.pi * tau)


def coherence_from_bandwidth(bandwidth):
    if not bandwidth > 0:
        raise DomainError("bandwidth must be positive")
    return 1.0 / (2.0 * math.pi * bandwidth)


@dataclass
class DoubleExpFit:
    tau: float
    amplitude: float
    baseline: float
    center: float
    stderr: dict
    reduced_chi2: float

    @property
    def bandwidth(self):
        return bandwidth_from_coherence(self.tau)

    @property
    def bandwidth_stderr(self):
        return self.bandwidth * self.stderr["tau"] / self.tau


def fit_double_exponential(hist, max_iter=200):
    """Fit ``A exp(-|t - t0| / tau) + B`` to a delay histogram.

    Poisson-weighted least squares, with weights taken from the model.  Raises DegenerateDataError when the
    histogram has no significant peak or fewer than five bins on either
    flank, FitError on non-convergence.
    """
    t = np.asarray(hist.centers, dtype=float)
    y = np.asarray(hist.counts, dtype=float)
    n = len(y)
    if n < 11:
        raise DegenerateDataError("histogram too short for a peak fit")
    edge = max(2, n // 10)
    base0 = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    imax = int(np.argmax(y))
    amp0 = float(y[imax] - base0)
    if amp0 <= 0 or amp0 < 6.0 * math.sqrt(max(base0, 1.0)):
        raise DegenerateDataError("histogram has no significant peak")
    if imax < 5 or n - 1 - imax < 5:
        raise DegenerateDataError("peak needs at least five bins on each flank")
    area = float(np.clip(y - base0, 0, None).sum()) * hist.bin_width
    tau0 = max(area / (2.0 * amp0), hist.bin_width)
    t0 = float(t[imax])

    x = (t - t0) / tau0
    sig = np.sqrt(np.maximum(y, 1.0))
    yn = y / amp0
    sn = sig / amp0

    def parts(p):
        u0, w, a, b = p
        d = x - u0
        e = np.exp(-np.abs(d) / w)
        return d, e

    def residuals(p):
        d, e = parts(p)
        return (p[2] * e + p[3] - yn) / sn

    def jacobian(p):
        u0, w, a, b = p
        d, e = parts(p)
        return np.column_stack([
            a * e * np.sign(d) / w,
            a * e * np.abs(d) / (w * w),
            e,
            np.ones_like(e),
        ]) / sn[:, None]

    # Data-based weights bias a Poisson fit low; refit with model-based
    # weights until the weights stop moving (Pearson chi-square).
    start = [0.0, 1.0, 1.0, base0 / amp0]
    for _ in range(3):
        try:
            res = levenberg_marquardt(residuals, jacobian, start,
                                      max_iter=max_iter, typical=[1.0, 1.0, 1.0, 1e-3])
        except FitError as exc:
            u0, w, a, b = exc.best
            exc.best = {"tau": abs(w) * tau0, "center": t0 + u0 * tau0,
                        "amplitude": a * amp0, "baseline": b * amp0}
            raise
        start = res.params
        d, e = parts(start)
        sn[:] = np.sqrt(np.maximum((start[2] * e + start[3]) * amp0, 1.0)) / amp0
    u0, w, a, b = res.params
    su, sw, sa, sb = res.stderr
    return DoubleExpFit(
        tau=float(abs(w) * tau0), amplitude=float(a * amp0), baseline=float(b * amp0),
        center=float(t0 + u0 * tau0),
        stderr={"tau": float(sw * tau0), "amplitude": float(sa * amp0),
                "baseline": float(sb * amp0), "center": float(su * tau0)},
        reduced_chi2=float(res.reduced_chi2),
    )
