"""Two-qubit time-bin state reconstruction.

Sixteen product projectors built from the single-qubit vectors |e>, |l>,
|+> = (|e> + |l>)/sqrt(2) and |+i> = (|e> + i|l>)/sqrt(2) are measured.
From their counts we form a linear-inversion estimate and a maximum-likelihood
estimate constrained to physical states, and we quantify uncertainty by
Poisson resampling.

Intensity normalisation: the four computational-basis settings (ee, el, le,
ll) partition unity, so the sum of their dwell-normalised rates is used as the
per-second intensity reference for every setting.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .errors import DegenerateDataError, DomainError, FitError, NoDataError, UnphysicalWarning

BASIS_LABELS = ("e", "l", "+", "+i")

_VECTORS = {
    "e": np.array([1.0, 0.0], complex),
    "l": np.array([0.0, 1.0], complex),
    "+": np.array([1.0, 1.0], complex) / math.sqrt(2),
    "+i": np.array([1.0, 1.0j], complex) / math.sqrt(2),
}

SETTINGS = tuple(product(BASIS_LABELS, BASIS_LABELS))
COMPUTATIONAL = (("e", "e"), ("e", "l"), ("l", "e"), ("l", "l"))

PHI_PLUS = np.array([1, 0, 0, 1], complex) / math.sqrt(2)

HERMITIAN_TOL = 1e-9
EIGEN_TOL = 1e-9
TRACE_TOL = 1e-9


def setting_label(setting):
    return "".join(setting)


def parse_setting(label):
    """Split a label such as ``"+i+"`` into ``("+i", "+")``."""
    parts = []
    rest = str(label)
    while rest:
        head = "+i" if rest.startswith("+i") else rest[0]
        if head not in _VECTORS:
            raise DomainError(f"invalid basis label in setting {label!r}")
        parts.append(head)
        rest = rest[len(head):]
    if len(parts) != 2:
        raise DomainError(f"setting {label!r} must name exactly two bases")
    return tuple(parts)


def _vector(label):
    try:
        return _VECTORS[label]
    except (KeyError, TypeError):
        raise DomainError(f"invalid basis label {label!r}; expected one of {BASIS_LABELS}") from None


def projector(basis_s, basis_i):
    psi = np.kron(_vector(basis_s), _vector(basis_i))
    return np.outer(psi, psi.conj())


_PROJECTORS = np.array([projector(s, i) for s, i in SETTINGS])


def _hermitian_basis():
    paulis = [
        np.eye(2, dtype=complex),
        np.array([[0, 1], [1, 0]], complex),
        np.array([[0, -1j], [1j, 0]], complex),
        np.array([[1, 0], [0, -1]], complex),
    ]
    return np.array([np.kron(a, b) for a in paulis for b in paulis])


_PAULI = _hermitian_basis()
# A[k, j] = Tr(Pi_k B_j) / 4, so p = A @ c for rho = sum_j c_j B_j / 4.
_INVERSION_MATRIX = np.einsum("kab,jba->kj", _PROJECTORS, _PAULI).real / 4.0
if abs(np.linalg.det(_INVERSION_MATRIX)) < 1e-12:  # pragma: no cover - fixed algebra
    raise RuntimeError("tomographic setting set is not informationally complete")


def check_physical(rho, strict=True):
    """Return a list of violated density-matrix invariants (empty if physical)."""
    rho = np.asarray(rho, complex)
    problems = []
    if rho.shape != (4, 4):
        raise DomainError(f"density matrix must be 4x4, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        problems.append("not Hermitian")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
        problems.append("trace differs from 1")
    herm = 0.5 * (rho + rho.conj().T)
    if np.linalg.eigvalsh(herm).min() < -EIGEN_TOL:
        problems.append("negative eigenvalue")
    if strict and problems:
        raise DomainError("non-physical density matrix: " + ", ".join(problems))
    return problems


def predicted_probability(rho, setting):
    check_physical(rho)
    p = np.trace(np.asarray(rho, complex) @ projector(*setting)).real
    if p < -1e-12 or p > 1 + 1e-12:
        raise DomainError(f"probability {p} outside [0, 1]")
    return float(min(max(p, 0.0), 1.0))


def psd_project(rho):
    """Clamp negative eigenvalues to zero and renormalise the trace."""
    herm = 0.5 * (np.asarray(rho, complex) + np.asarray(rho, complex).conj().T)
    w, v = np.linalg.eigh(herm)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise DegenerateDataError("density matrix has no positive eigenvalue")
    out = (v * (w / w.sum())) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def fidelity(rho, target=PHI_PLUS):
    """<target|rho|target> for a normalised pure target.

    A Hermitian, unit-trace matrix with slightly negative eigenvalues (for
    example one printed with rounded entries) is still evaluated; an
    :class:`UnphysicalWarning` is emitted.
    """
    psi = np.asarray(target, complex).ravel()
    if psi.shape != (4,):
        raise DomainError("target must be a 4-vector")
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-9:
        raise DomainError("target state is not normalised")
    rho = np.asarray(rho, complex)
    problems = check_physical(rho, strict=False)
    if "not Hermitian" in problems or "trace differs from 1" in problems:
        raise DomainError("fidelity needs a Hermitian unit-trace matrix: " + ", ".join(problems))
    if problems:
        warnings.warn("fidelity evaluated on a matrix with negative eigenvalues", UnphysicalWarning,
                      stacklevel=2)
    return float(np.vdot(psi, rho @ psi).real)


def purity(rho):
    rho = np.asarray(rho, complex)
    return float(np.trace(rho @ rho).real)


def trace_distance(rho, sigma):
    d = np.asarray(rho, complex) - np.asarray(sigma, complex)
    d = 0.5 * (d + d.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(d)).sum())


def renormalize(rho):
    rho = np.asarray(rho, complex)
    return rho / np.trace(rho).real


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class MeasurementRecord:
    setting: tuple
    count: int
    dwell: float = 1.0

    def __post_init__(self):
        s = self.setting
        if isinstance(s, str):
            s = parse_setting(s)
        s = tuple(s)
        for lab in s:
            _vector(lab)
        if len(s) != 2:
            raise DomainError("setting must be a pair of basis labels")
        object.__setattr__(self, "setting", s)
        if self.count < 0 or int(self.count) != self.count:
            raise DomainError(f"count must be a non-negative integer, got {self.count}")
        object.__setattr__(self, "count", int(self.count))
        if not self.dwell > 0:
            raise DomainError("dwell must be positive")

    @property
    def label(self):
        return setting_label(self.setting)


def _ordered(records):
    by_setting = {}
    for r in records:
        if r.setting in by_setting:
            raise DomainError(f"duplicate setting {r.label}")
        by_setting[r.setting] = r
    missing = [setting_label(s) for s in SETTINGS if s not in by_setting]
    if missing:
        raise DomainError("missing settings: " + ", ".join(missing))
    recs = [by_setting[s] for s in SETTINGS]
    counts = np.array([r.count for r in recs], float)
    dwell = np.array([r.dwell for r in recs], float)
    if counts.sum() <= 0:
        raise NoDataError("all tomography counts are zero")
    return counts, dwell


def _intensity(counts, dwell):
    idx = [SETTINGS.index(s) for s in COMPUTATIONAL]
    rate = float(np.sum(counts[idx] / dwell[idx]))
    if rate <= 0:
        raise NoDataError("computational-basis settings recorded no counts; intensity undefined")
    return rate


def measured_probabilities(records):
    counts, dwell = _ordered(records)
    return counts / dwell / _intensity(counts, dwell)


@dataclass
class LinearInversion:
    rho: np.ndarray
    physical: bool
    min_eigenvalue: float


def linear_inversion(records):
    p = measured_probabilities(records)
    c = np.linalg.solve(_INVERSION_MATRIX, p)
    rho = np.einsum("j,jab->ab", c, _PAULI) / 4.0
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    lam = float(np.linalg.eigvalsh(rho).min())
    return LinearInversion(rho, lam >= -EIGEN_TOL, lam)


# ---------------------------------------------------------------- MLE

_TRIL = np.tril_indices(4, -1)


def _unpack(x):
    t = np.zeros((4, 4), complex)
    t[np.diag_indices(4)] = x[:4]
    t[_TRIL] = x[4:10] + 1j * x[10:16]
    return t


def _pack(t):
    return np.concatenate([np.diag(t).real, t[_TRIL].real, t[_TRIL].imag])


def _params_from_rho(rho, floor=1e-3):
    """Parameters x with rho = T^dag T / Tr, T lower triangular."""
    rho = (1 - floor) * psd_project(rho) + floor * np.eye(4) / 4
    j = np.eye(4)[::-1]
    low = np.linalg.cholesky(j @ rho @ j)
    t = (j @ low @ j).conj().T
    return _pack(t)


def _rho_from_params(x):
    t = _unpack(x)
    a = t.conj().T @ t
    return a / np.trace(a).real


class _Likelihood:
    """Poisson log-likelihood relative to the saturated model (always <= 0)."""

    def __init__(self, counts, dwell):
        self.counts = counts
        self.expected_scale = _intensity(counts, dwell) * dwell
        self.positive = counts > 0

    def _mu(self, rho):
        p = np.einsum("kab,ba->k", _PROJECTORS, rho).real
        return np.clip(p, 0.0, None) * self.expected_scale

    def value(self, x):
        return self.of_rho(_rho_from_params(x))

    def of_rho(self, rho):
        mu = self._mu(rho)
        n = self.counts
        pos = self.positive
        if np.any(mu[pos] <= 0):
            return -math.inf
        return float(np.sum(n[pos] * np.log(mu[pos] / n[pos])) - np.sum(mu - n))

    def gradient(self, x):
        t = _unpack(x)
        a = t.conj().T @ t
        tr = np.trace(a).real
        rho = a / tr
        mu = self._mu(rho)
        w = np.where(self.positive, self.counts / np.where(mu > 0, mu, 1.0), 0.0) - 1.0
        g = np.einsum("k,kab->ab", w * self.expected_scale, _PROJECTORS)
        h = (g - np.trace(g @ rho).real * np.eye(4)) / tr
        m = (h @ t.conj().T).T
        return np.concatenate([2 * np.diag(m).real, 2 * m[_TRIL].real, -2 * m[_TRIL].imag])


@dataclass
class MLEResult:
    rho: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)


def _bfgs_ascent(f, grad, x0, tol, max_iter):
    x = np.asarray(x0, float)
    fx = f(x)
    g = grad(x)
    hinv = np.eye(x.size)
    history = [fx]
    for it in range(1, max_iter + 1):
        d = hinv @ g
        if g @ d <= 0:
            hinv = np.eye(x.size)
            d = g.copy()
        step, accepted = 1.0, False
        slope = g @ d
        for _ in range(60):
            xn = x + step * d
            fn = f(xn)
            if fn >= fx + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if not np.allclose(hinv, np.eye(x.size)):
                hinv = np.eye(x.size)
                continue
            return x, fx, it, True, history
        gn = grad(xn)
        s, y = xn - x, g - gn  # y is the gradient change of -f
        improvement = fn - fx
        x, fx, g = xn, fn, gn
        history.append(fx)
        sy = s @ y
        if sy > 1e-16:
            rho_k = 1.0 / sy
            v = np.eye(x.size) - rho_k * np.outer(s, y)
            hinv = v @ hinv @ v.T + rho_k * np.outer(s, s)
        if improvement < tol:
            return x, fx, it, True, history
    return x, fx, max_iter, False, history


def mle_reconstruct(records, tol=1e-10, max_iter=10_000, initial=None):
    """Maximum-likelihood density matrix.

    Ascent runs on the 16 real parameters of a lower-triangular T with
    rho = T^dag T / Tr(T^dag T), starting from the PSD-projected linear
    inversion.  Every accepted step raises the likelihood, and the recorded
    history is therefore non-decreasing.  On non-convergence the best iterate
    is returned with ``converged=False``.
    """
    counts, dwell = _ordered(records)
    like = _Likelihood(counts, dwell)
    start = linear_inversion(records).rho if initial is None else initial
    x0 = _params_from_rho(start)
    x, fx, iters, converged, history = _bfgs_ascent(like.value, like.gradient, x0, tol, max_iter)
    rho = _rho_from_params(x)
    rho = 0.5 * (rho + rho.conj().T)
    check_physical(rho)
    return MLEResult(rho, fx, iters, converged, history)


# ---------------------------------------------------------------- Monte Carlo


@dataclass
class MonteCarloResult:
    mean: float
    std: float
    values: np.ndarray
    dropped: list
    trials: int


def _trial(records, seed, index, target, tol, max_iter):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    resampled = [MeasurementRecord(r.setting, int(rng.poisson(r.count)), r.dwell) for r in records]
    try:
        res = mle_reconstruct(resampled, tol=tol, max_iter=max_iter)
    except (NoDataError, DomainError):
        return None
    if not res.converged:
        return None
    return fidelity(res.rho, target)


def monte_carlo_uncertainty(records, trials, seed=0, threads=1, target=PHI_PLUS, tol=1e-10,
                            max_iter=10_000):
    """Fidelity spread under Poisson resampling of every count.

    Trial ``i`` draws from ``SeedSequence(seed, spawn_key=(i,))`` so the
    result does not depend on the thread count or scheduling order.
    """
    if trials < 2:
        raise DomainError("need at least two Monte Carlo trials")
    records = list(records)
    _ordered(records)
    job = lambda i: _trial(records, seed, i, target, tol, max_iter)  # noqa: E731
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(job, range(trials)))
    else:
        out = [job(i) for i in range(trials)]
    dropped = [i for i, v in enumerate(out) if v is None]
    if len(dropped) > 0.1 * trials:
        raise FitError(f"{len(dropped)} of {trials} Monte Carlo trials failed to converge",
                       diagnostics={"dropped": dropped})
    values = np.array([v for v in out if v is not None])
    return MonteCarloResult(float(values.mean()), float(values.std(ddof=1)), values, dropped, trials)


# ---------------------------------------------------------------- synthetic counts


def simulate_counts(rho, per_setting, seed=0, dwell=1.0):
    """Poisson counts for all 16 settings.

    The mean of setting k is ``4 * per_setting * p_k`` so that a setting
    averages ``per_setting`` counts.  Small negative probabilities from a
    rounded, slightly non-PSD input are clipped to zero.
    """
    rho = np.asarray(rho, complex)
    rng = np.random.default_rng(seed)
    p = np.clip(np.einsum("kab,ba->k", _PROJECTORS, rho).real, 0.0, None)
    n = rng.poisson(4.0 * per_setting * p)
    return [MeasurementRecord(s, int(c), dwell) for s, c in zip(SETTINGS, n)]


def expected_records(rho, per_setting, dwell=1.0):
    """Noise-free (rounded) counts; useful for consistency checks."""
    p = np.clip(np.einsum("kab,ba->k", _PROJECTORS, np.asarray(rho, complex)).real, 0.0, None)
    return [MeasurementRecord(s, int(round(4.0 * per_setting * q)), dwell) for s, q in zip(SETTINGS, p)]


# ---------------------------------------------------------------- file formats


def read_counts(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise DomainError(f"{path}: expected an object mapping setting labels to counts")
    records = []
    for label, entry in obj.items():
        if isinstance(entry, dict):
            count, dwell = entry.get("count"), entry.get("dwell_s", 1.0)
        else:
            count, dwell = entry, 1.0
        if not isinstance(count, (int, float)) or not isinstance(dwell, (int, float)):
            raise DomainError(f"{path}: setting {label!r} needs numeric count and dwell_s")
        records.append(MeasurementRecord(parse_setting(label), count, float(dwell)))
    _ordered(records)
    return records


def write_counts(path, records):
    obj = {r.label: {"count": r.count, "dwell_s": r.dwell} for r in records}
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def density_to_json(rho):
    return [[float(z.real), float(z.imag)] for z in np.asarray(rho, complex).ravel()]


def density_from_json(entries):
    arr = np.asarray(entries, float)
    if arr.shape != (16, 2):
        raise DomainError("density JSON must hold 16 [re, im] pairs in row-major order")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(4, 4)


def write_density(path, rho, **fields):
    obj = {"rho": density_to_json(rho)}
    obj.update(fields)
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_density(path):
    obj = json.loads(Path(path).read_text())
    return density_from_json(obj["rho"] if isinstance(obj, dict) else obj)
