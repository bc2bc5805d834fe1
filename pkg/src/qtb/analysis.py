"""Entanglement figures of merit from gated coincidence counts.

Everything here is *raw*: no accidental subtraction unless a function name
says so (``subtract_accidentals``).
"""
import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, DomainError, NoDataError, UnphysicalWarning

PORT_PAIRS = ("A1B1", "A1B2", "A2B1", "A2B2")
PORT_INDEX = {"A1B1": (0, 0), "A1B2": (0, 1), "A2B1": (1, 0), "A2B2": (1, 1)}
CHSH_THRESHOLD = 1.0 / math.sqrt(2.0)


def parity(port_pair):
    """(-1)^(i+j) for ports Ai, Bj."""
    i, j = PORT_INDEX[port_pair]
    return 1 if (i + j) % 2 == 0 else -1


@dataclass
class FringeScan:
    port_pair: str
    phases: np.ndarray        # beta, rad
    counts: np.ndarray
    dwell: np.ndarray         # s
    alpha: float = 0.0        # fixed phase of the other interferometer

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        self.dwell = np.broadcast_to(np.asarray(self.dwell, dtype=float), self.phases.shape).copy()
        if self.port_pair not in PORT_INDEX:
            raise DomainError(f"unknown port pair {self.port_pair!r}")
        if not (self.phases.shape == self.counts.shape) or self.phases.ndim != 1:
            raise DomainError("phases and counts must be 1-D and equal length")
        if np.any(self.counts < 0):
            raise DomainError("counts must be non-negative")
        if np.any(self.dwell <= 0):
            raise DomainError("dwell times must be positive")

    @property
    def rates(self):
        return self.counts / self.dwell


@dataclass
class VisibilityResult:
    visibility: float
    sigma: float
    phase_offset: float       # rad in [0, 2 pi); 0 for even parity, pi for odd
    phase_sigma: float
    amplitude: float          # mean rate A
    port_pair: str = None

    @property
    def unphysical(self):
        return self.visibility > 1.0


def _cosine_lsq(x, y, var, with_offset=True):
    cols = [np.cos(x), np.sin(x)]
    if with_offset:
        cols.insert(0, np.ones_like(x))
    X = np.column_stack(cols)
    w = 1.0 / var
    if np.linalg.matrix_rank(X * np.sqrt(w)[:, None]) < X.shape[1]:
        raise DegenerateDataError("phases do not determine a cosine fringe")
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    coef = cov @ (XtW @ y)
    return coef, cov


def _amplitude_phase(b, c, cov_bc):
    r = math.hypot(b, c)
    vb, vc, vbc = cov_bc[0, 0], cov_bc[1, 1], cov_bc[0, 1]
    if r > 0:
        sr = math.sqrt(max((b * b * vb + c * c * vc + 2 * b * c * vbc) / (r * r), 0.0))
        sphi = math.sqrt(max((c * c * vb + b * b * vc - 2 * b * c * vbc), 0.0)) / (r * r)
    else:
        sr = math.sqrt(max(0.5 * (vb + vc), 0.0))
        sphi = math.pi
    return r, sr, sphi


def fit_fringe(scan):
    """Visibility of ``rate = A + B cos(beta) + C sin(beta)``.

    Weighted linear least squares with Poisson variances; V = sqrt(B^2 + C^2)/A
    with first-order error propagation.  The phase offset is
    ``atan2(-C, B) - alpha`` folded into [0, 2 pi).
    """
    if len(np.unique(np.round(scan.phases % (2 * math.pi), 12))) < 3:
        raise DegenerateDataError("need at least 3 distinct phases")
    y = scan.rates
    var = np.maximum(scan.counts, 1.0) / scan.dwell ** 2
    (a, b, c), cov = _cosine_lsq(scan.phases, y, var)
    if a <= 0:
        raise DegenerateDataError("fringe has non-positive mean rate")
    r, sr, sphi = _amplitude_phase(b, c, cov[1:, 1:])
    v = r / a
    if r > 0:
        g = np.array([-r / a ** 2, b / (a * r), c / (a * r)])
        sv = math.sqrt(max(float(g @ cov @ g), 0.0))
    else:
        sv = sr / a
    offset = (math.atan2(-c, b) - scan.alpha) % (2 * math.pi)
    if v > 1.0:
        warnings.warn(f"{scan.port_pair}: fitted visibility {v:.4f} exceeds 1", UnphysicalWarning, stacklevel=2)
    return VisibilityResult(v, sv, offset, sphi, a, scan.port_pair)


def fringe_curve(result, alpha=0.0, n=200):
    """Model curve (phase, rate) for plotting a fitted fringe."""
    beta = np.linspace(0.0, 2 * math.pi, n)
    rate = result.amplitude * (1.0 + result.visibility * np.cos(alpha + beta + result.phase_offset))
    return beta, rate


def correlation_coefficient(n11, n12, n21, n22):
    """E = (n11 - n12 - n21 + n22) / (n11 + n12 + n21 + n22)."""
    total = n11 + n12 + n21 + n22
    if total <= 0:
        raise NoDataError("no coincidences at any port pair")
    return (n11 - n12 - n21 + n22) / total


def correlation_coefficient_error(n11, n12, n21, n22):
    """Poisson 1-sigma error of E: sqrt((1 - E^2) / N)."""
    total = n11 + n12 + n21 + n22
    if total <= 0:
        raise NoDataError("no coincidences at any port pair")
    e = correlation_coefficient(n11, n12, n21, n22)
    return math.sqrt(max(1.0 - e * e, 0.0) / total)


def correlation_from_scans(scans):
    """E at every common phase setting of four port-pair scans.

    Returns ``(alpha + beta, E, sigma_E)`` arrays.  Counts are normalised by
    dwell before combining so unequal dwell times do not bias E.
    """
    s = [scans[p] for p in PORT_PAIRS]
    for other in s[1:]:
        if not np.allclose(other.phases, s[0].phases):
            raise DegenerateDataError("port-pair scans use different phase settings")
    r = [x.rates for x in s]
    E = np.array([correlation_coefficient(*vals) for vals in zip(*r)])
    N = np.sum([x.counts for x in s], axis=0)
    sE = np.sqrt(np.maximum(1.0 - E * E, 0.0) / np.maximum(N, 1.0))
    return s[0].alpha + s[0].phases, E, sE


def fit_correlation(sum_phases, E, sigma_E=None):
    """Fit ``E = V cos(x + phi)``; returns VisibilityResult (amplitude fixed to 1)."""
    x = np.asarray(sum_phases, float)
    y = np.asarray(E, float)
    var = np.ones_like(y) if sigma_E is None else np.maximum(np.asarray(sigma_E, float) ** 2, 1e-300)
    (b, c), cov = _cosine_lsq(x, y, var, with_offset=False)
    if sigma_E is None:
        resid = y - (b * np.cos(x) + c * np.sin(x))
        dof = len(y) - 2
        cov = cov * (resid @ resid / dof if dof > 0 else np.nan)
    v, sv, sphi = _amplitude_phase(b, c, cov)
    return VisibilityResult(v, sv, math.atan2(-c, b) % (2 * math.pi), sphi, 1.0, "E")


@dataclass
class ChshResult:
    s: float
    n_sigma: float


def chsh_from_visibility(visibility, sigma):
    """CHSH value 2 sqrt(2) V and the violation in standard deviations of V."""
    if not sigma > 0:
        raise DomainError("visibility uncertainty must be positive")
    if not 0.0 <= visibility <= 1.05:
        raise DomainError(f"visibility {visibility!r} outside [0, 1.05]")
    return ChshResult(2.0 * math.sqrt(2.0) * visibility, (visibility - CHSH_THRESHOLD) / sigma)


@dataclass
class RawVisibility:
    visibility: float
    sigma: float
    weighted: bool


def raw_visibility(results):
    """Inverse-variance weighted mean of per-port visibilities.

    Falls back to the plain mean (``weighted=False``) if any uncertainty is zero.
    """
    v = np.array([r.visibility for r in results], float)
    s = np.array([r.sigma for r in results], float)
    if len(v) == 0:
        raise NoDataError("no visibilities to combine")
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        sig = float(np.sqrt(np.sum(s ** 2)) / len(s)) if np.all(np.isfinite(s)) else math.nan
        return RawVisibility(float(v.mean()), sig, False)
    w = 1.0 / s ** 2
    return RawVisibility(float((w * v).sum() / w.sum()), float(1.0 / math.sqrt(w.sum())), True)


def subtract_accidentals(scan, accidental_counts):
    """Accidental-corrected copy of a scan.  The result is NOT a raw measurement."""
    acc = np.broadcast_to(np.asarray(accidental_counts, float), scan.counts.shape)
    return FringeScan(scan.port_pair, scan.phases, np.clip(scan.counts - acc, 0, None),
                      scan.dwell, scan.alpha)


# files ---------------------------------------------------------------------

def read_fringe_scans(paths, alpha=0.0):
    """Read ``phase_rad,count,dwell_s`` scans.

    Either one file with an extra ``port`` column, or several files whose
    names contain the port pair (``..._A1B1.csv``).
    """
    if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__"):
        paths = [paths]
    data = {}
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(line for line in fh if not line.lstrip().startswith("#"))
            for row in reader:
                port = row.get("port") or next((p for p in PORT_PAIRS if p in str(path)), None)
                if port is None:
                    raise DegenerateDataError(f"{path}: cannot tell which port pair this scan belongs to")
                d = data.setdefault(port, ([], [], []))
                d[0].append(float(row["phase_rad"]))
                d[1].append(float(row["count"]))
                d[2].append(float(row["dwell_s"]))
    return {p: FringeScan(p, *map(np.asarray, d), alpha=alpha) for p, d in sorted(data.items())}


def write_fringe_scans(path, scans):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("port,phase_rad,count,dwell_s\n")
        for p in PORT_PAIRS:
            if p not in scans:
                continue
            s = scans[p]
            for ph, n, d in zip(s.phases, s.counts, s.dwell):
                fh.write(f"{p},{ph:.9f},{int(n)},{d:.6g}\n")
