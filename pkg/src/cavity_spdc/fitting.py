"""Small Levenberg-Marquardt engine used by the temporal fits.

Central finite-difference Jacobians, multiplicative damping (x10 on a
rejected step, /10 on an accepted one) and Marquardt diagonal scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DAMPING_START = 1e-3
MAX_ITERATIONS = 200
RELATIVE_TOLERANCE = 1e-10
FD_REL_STEP = 1e-6
_MAX_DAMPING = 1e16


@dataclass
class FitReport:
    names: tuple[str, ...]
    values: np.ndarray
    errors: np.ndarray
    rss: float
    converged: bool
    iterations: int
    history: list[float] = field(default_factory=list)
    residuals: np.ndarray | None = None
    flags: list[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def error(self, name: str) -> float:
        return float(self.errors[self.names.index(name)])

    @property
    def reliable(self) -> bool:
        return self.converged and not self.flags

    def as_dict(self) -> dict:
        out = {n: float(v) for n, v in zip(self.names, self.values)}
        out.update({f"{n}_err": float(e) for n, e in zip(self.names, self.errors)})
        out.update(rss=self.rss, converged=self.converged, iterations=self.iterations)
        return out


def fd_jacobian(fun, p, scale):
    """Central-difference Jacobian of the vector function ``fun`` at ``p``."""
    p = np.asarray(p, dtype=float)
    f0 = fun(p)
    jac = np.empty((f0.size, p.size))
    for j in range(p.size):
        h = FD_REL_STEP * max(abs(p[j]), scale[j])
        step = np.zeros_like(p)
        step[j] = h
        jac[:, j] = (fun(p + step) - fun(p - step)) / (2.0 * h)
    return jac


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    p0: Sequence[float],
    scale: Sequence[float] | None = None,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    max_iter: int = MAX_ITERATIONS,
    rtol: float = RELATIVE_TOLERANCE,
):
    """Minimise ``sum(residual(p)**2)``.

    ``scale`` gives a typical magnitude per parameter for finite-difference
    steps; ``project`` maps a trial point back into the feasible set.
    Returns ``(p, rss, converged, iterations, history)`` where ``history``
    holds the RSS after every accepted step (starting with the initial one).
    """
    p = np.asarray(p0, dtype=float).copy()
    scale = np.abs(p) if scale is None else np.asarray(scale, dtype=float)
    scale = np.where(scale > 0, scale, 1.0)
    if project is not None:
        p = project(p)
    r = residual(p)
    rss = float(r @ r)
    history = [rss]
    lam = DAMPING_START
    converged = False
    it = 0
    floor = 1e-28 * max(rss, 1e-300)
    while it < max_iter:
        it += 1
        jac = fd_jacobian(residual, p, scale)
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag == 0] = 1.0
        improved = False
        while lam < _MAX_DAMPING:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            if project is not None:
                trial = project(trial)
            r_trial = residual(trial)
            rss_trial = float(r_trial @ r_trial)
            if np.isfinite(rss_trial) and rss_trial <= rss:
                improved = True
                break
            lam *= 10.0
        if not improved:
            # no descent direction left at any damping: stationary point
            converged = True
            break
        change = (rss - rss_trial) / rss if rss > 0 else 0.0
        small_step = np.all(np.abs(trial - p) <= 1e-12 * np.maximum(np.abs(p), scale))
        p, r, rss = trial, r_trial, rss_trial
        history.append(rss)
        lam = max(lam / 10.0, 1e-12)
        if change < rtol or small_step or rss <= floor:
            converged = True
            break
    return p, rss, converged, it, history


def covariance(jac: np.ndarray, rss: float, dof: int, scale_by_chi2: bool) -> np.ndarray:
    """(J^T J)^-1, optionally scaled by rss/dof.

    Columns are normalised before inversion; parameters in seconds next to
    parameters in counts otherwise defeat the pseudo-inverse cutoff.
    """
    norms = np.linalg.norm(jac, axis=0)
    norms[norms == 0] = 1.0
    js = jac / norms
    try:
        cov = np.linalg.pinv(js.T @ js) / np.outer(norms, norms)
    except np.linalg.LinAlgError:
        return np.full((jac.shape[1], jac.shape[1]), np.nan)
    if scale_by_chi2 and dof > 0:
        cov = cov * (rss / dof)
    return cov
