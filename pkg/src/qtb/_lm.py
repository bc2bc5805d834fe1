"""Small Levenberg-Marquardt solver used by the Lorentzian and
double-exponential fits.

Deterministic, no line search, Marquardt diagonal scaling.  Kept local
rather than using scipy so that the iteration cap, step-based stopping
rule and best-so-far reporting behave exactly as the fitting API promises.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import FitError


@dataclass
class LMResult:
    params: np.ndarray
    stderr: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else float("nan")


def levenberg_marquardt(residuals, jacobian, p0, max_iter=200, xtol=1e-9,
                        lam0=1e-3, absolute_sigma=False, typical=None):
    """Minimise ``sum(residuals(p)**2)``.

    ``residuals(p)`` returns the (already weighted) residual vector and
    ``jacobian(p)`` its derivative, shape ``(n_res, n_par)``.  Stops when the
    largest relative parameter step falls below ``xtol``.  Standard errors
    are ``sqrt(diag(s2 * inv(J^T J)))`` with ``s2`` the reduced chi-square
    unless ``absolute_sigma`` is set.

    ``typical`` gives per-parameter magnitudes below which steps are judged
    absolutely rather than relatively (useful for offsets that sit near 0).

    Raises FitError (carrying the best parameters) if ``max_iter`` is hit.
    """
    p = np.asarray(p0, dtype=float).copy()
    floor = np.full(p.shape, 1e-300) if typical is None else np.asarray(typical, float)
    r = residuals(p)
    chi2 = float(r @ r)
    lam = lam0
    history = [chi2]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = jacobian(p)
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        accepted = False
        # inner loop: raise damping until the step decreases chi2
        for _ in range(60):
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            r_trial = residuals(trial)
            chi2_trial = float(r_trial @ r_trial)
            if np.isfinite(chi2_trial) and chi2_trial <= chi2:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no descent direction left: we are at a minimum to working precision
            converged = True
            break
        rel = np.max(np.abs(step) / np.maximum(np.abs(trial), floor))
        p, r, chi2 = trial, r_trial, chi2_trial
        history.append(chi2)
        lam = max(lam / 10.0, 1e-15)
        if rel < xtol or chi2 == 0.0:
            converged = True
            break

    if not converged:
        raise FitError(f"no convergence after {max_iter} iterations", best=p,
                       diagnostics={"chi2": chi2, "lambda": lam})

    J = jacobian(p)
    dof = len(r) - len(p)
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((len(p), len(p)), np.nan)
    if not absolute_sigma:
        cov = cov * (chi2 / dof if dof > 0 else np.nan)
    stderr = np.sqrt(np.abs(np.diag(cov)))
    return LMResult(p, stderr, cov, chi2, dof, it, converged, history)
