"""Temporal observables: cross-correlation, HOM dip, heralded g2 versus power."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData, NonConvergence
from .fitting import FitReport, covariance, levenberg_marquardt

TWO_PI = 2.0 * math.pi

XCORR_PARAMS = ("dnu_s", "dnu_i", "amplitude", "baseline", "t0")
HOM_PARAMS = ("visibility", "width", "baseline")
LINEAR_PARAMS = ("intercept", "slope")


@dataclass(frozen=True)
class Histogram:
    """Binned data: centres (s, or mW for power scans), counts, optional sigma."""

    centers: np.ndarray
    counts: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        n = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "counts", n)
        if c.ndim != 1 or c.shape != n.shape:
            raise ValueError("centers and counts must be 1-D arrays of equal length")
        if c.size > 1 and not np.all(np.diff(c) > 0):
            raise ValueError("bin centres must be strictly increasing")
        if np.any(n < 0):
            raise ValueError("counts must be non-negative")
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != n.shape or np.any(s <= 0):
                raise ValueError("sigma must be positive and match counts")
            object.__setattr__(self, "sigma", s)

    def weights(self, weighted: bool = True) -> np.ndarray:
        if not weighted:
            return np.ones_like(self.counts)
        if self.sigma is not None:
            return 1.0 / self.sigma**2
        return 1.0 / np.maximum(self.counts, 1.0)


# --------------------------------------------------------------------- xcorr model


def cross_correlation_model(t, dnu_s, dnu_i, amplitude, baseline, t0):
    """Rising signal exponential before ``t0``, falling idler exponential after."""
    x = np.asarray(t, dtype=float) - t0
    rise = np.exp(TWO_PI * dnu_s * np.minimum(x, 0.0))
    fall = np.exp(-TWO_PI * dnu_i * np.maximum(x, 0.0))
    return amplitude * np.where(x < 0, rise, fall) + baseline


def cross_correlation_jacobian(t, dnu_s, dnu_i, amplitude, baseline, t0):
    x = np.asarray(t, dtype=float) - t0
    neg = x < 0
    e = np.where(
        neg,
        np.exp(TWO_PI * dnu_s * np.minimum(x, 0.0)),
        np.exp(-TWO_PI * dnu_i * np.maximum(x, 0.0)),
    )
    jac = np.empty((x.size, 5))
    jac[:, 0] = np.where(neg, amplitude * e * TWO_PI * x, 0.0)
    jac[:, 1] = np.where(neg, 0.0, -amplitude * e * TWO_PI * x)
    jac[:, 2] = e
    jac[:, 3] = 1.0
    jac[:, 4] = np.where(neg, -amplitude * e * TWO_PI * dnu_s, amplitude * e * TWO_PI * dnu_i)
    return jac


# ----------------------------------------------------------------------- HOM model


def hom_model(dt, visibility, width, baseline):
    """Inverse Lorentzian dip: baseline * (1 - V / (1 + (dt / width)^2))."""
    u = np.asarray(dt, dtype=float) / width
    return baseline * (1.0 - visibility / (1.0 + u * u))


def hom_jacobian(dt, visibility, width, baseline):
    dt = np.asarray(dt, dtype=float)
    lor = 1.0 / (1.0 + (dt / width) ** 2)
    jac = np.empty((dt.size, 3))
    jac[:, 0] = -baseline * lor
    jac[:, 1] = -baseline * visibility * lor**2 * 2.0 * dt**2 / width**3
    jac[:, 2] = 1.0 - visibility * lor
    return jac


# ------------------------------------------------------------------------- fitting


def _check_data(data: Histogram, min_points: int, what: str) -> None:
    if data.counts.size < min_points:
        raise DegenerateData(f"{what} fit needs at least {min_points} points, got {data.counts.size}")
    if np.ptp(data.counts) == 0:
        raise DegenerateData(f"{what} data are flat")


def _finish(names, p, rss, converged, it, history, data, model, jac_fn, weights, weighted):
    w = np.sqrt(weights)
    jac = jac_fn(data.centers, *p) * w[:, None]
    cov = covariance(jac, rss, data.counts.size - len(names), scale_by_chi2=not weighted)
    errors = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    resid = data.counts - model(data.centers, *p)
    report = FitReport(tuple(names), p, errors, rss, converged, it, history, resid)
    if not converged:
        report.flags.append("not converged: estimates unreliable")
        raise NonConvergence("fit did not converge within the iteration budget", report)
    return report


def _xcorr_start(data: Histogram):
    t, y = data.centers, data.counts
    n_edge = max(2, t.size // 10)
    baseline = float(np.median(np.concatenate([y[:n_edge], y[-n_edge:]])))
    k = int(np.argmax(y))
    amp = float(y[k] - baseline)
    t0 = float(t[k])
    target = baseline + amp / math.e
    dt = float(np.median(np.diff(t)))

    def tau(side):
        idx = range(k, -1, -1) if side < 0 else range(k, t.size)
        for j in idx:
            if y[j] < target:
                return max(abs(t[j] - t0), dt)
        return 3.0 * dt

    return np.array([1.0 / (TWO_PI * tau(-1)), 1.0 / (TWO_PI * tau(1)), amp, baseline, t0])


def fit_cross_correlation(data: Histogram, weighted: bool = True, p0=None) -> FitReport:
    """Fit the two-sided exponential; parameters ``XCORR_PARAMS``."""
    _check_data(data, 20, "cross-correlation")
    start = _xcorr_start(data) if p0 is None else np.asarray(p0, dtype=float)
    weights = data.weights(weighted)
    sw = np.sqrt(weights)
    dt = float(np.median(np.diff(data.centers)))
    scale = np.array([abs(start[0]), abs(start[1]), abs(start[2]), max(abs(start[3]), 1.0), dt])

    def resid(p):
        return sw * (data.counts - cross_correlation_model(data.centers, *p))

    def project(p):
        q = p.copy()
        q[0] = abs(q[0]) or start[0]
        q[1] = abs(q[1]) or start[1]
        return q

    p, rss, conv, it, hist = levenberg_marquardt(resid, start, scale=scale, project=project)
    return _finish(
        XCORR_PARAMS, p, rss, conv, it, hist, data,
        cross_correlation_model, cross_correlation_jacobian, weights, weighted,
    )


def _hom_start(data: Histogram):
    x, y = data.centers, data.counts
    n_edge = max(2, x.size // 5)
    baseline = float(np.median(np.concatenate([y[:n_edge], y[-n_edge:]])))
    vis = float(np.clip(1.0 - y.min() / baseline, 0.05, 0.99)) if baseline > 0 else 0.5
    half = baseline * (1.0 - vis / 2.0)
    below = x[y < half]
    width = 0.5 * float(np.ptp(below)) if below.size > 1 else float(np.ptp(x)) / 10.0
    width = width or float(np.ptp(x)) / 10.0
    return np.array([vis, width, baseline])


def fit_hom(data: Histogram, weighted: bool = True, p0=None) -> FitReport:
    """Fit the inverse-Lorentzian dip; visibility is kept in [0, 1]."""
    _check_data(data, 10, "HOM")
    start = _hom_start(data) if p0 is None else np.asarray(p0, dtype=float)
    weights = data.weights(weighted)
    sw = np.sqrt(weights)
    scale = np.array([1.0, abs(start[1]), max(abs(start[2]), 1e-12)])

    def resid(p):
        return sw * (data.counts - hom_model(data.centers, *p))

    def project(p):
        q = p.copy()
        q[0] = min(max(q[0], 0.0), 1.0)
        q[1] = abs(q[1]) or start[1]
        return q

    p, rss, conv, it, hist = levenberg_marquardt(resid, start, scale=scale, project=project)
    return _finish(
        HOM_PARAMS, p, rss, conv, it, hist, data, hom_model, hom_jacobian, weights, weighted
    )


def fit_linear_g2(power, g2, sigma=None) -> FitReport:
    """Weighted straight-line fit of heralded g2 against pump power (mW)."""
    x = np.asarray(power, dtype=float)
    y = np.asarray(g2, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("power and g2 must be 1-D arrays of equal length")
    if np.unique(x).size < 2:
        raise DegenerateData("linear fit needs at least two distinct powers")
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float) ** 2
    design = np.column_stack([np.ones_like(x), x]) * np.sqrt(w)[:, None]
    coef, *_ = np.linalg.lstsq(design, y * np.sqrt(w), rcond=None)
    resid = y - (coef[0] + coef[1] * x)
    rss = float(np.sum(w * resid**2))
    cov = covariance(design, rss, x.size - 2, scale_by_chi2=sigma is None)
    report = FitReport(
        LINEAR_PARAMS, coef, np.sqrt(np.clip(np.diag(cov), 0, None)), rss, True, 1, [rss], resid
    )
    if coef[0] < 0:
        report.flags.append("negative zero-power intercept (unphysical)")
    return report


def predict_g2(report: FitReport, power):
    return report["intercept"] + report["slope"] * np.asarray(power, dtype=float)


# ------------------------------------------------------------------ bookkeeping


def visibility_budget(spectral_purity: float, fock_purity: float, contrast: float) -> float:
    for name, v in (("spectral_purity", spectral_purity), ("fock_purity", fock_purity),
                    ("contrast", contrast)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return spectral_purity * fock_purity * contrast


def bandwidth_report(dnu_hz: float) -> dict:
    """Photon bandwidth and coherence time under three labelled conventions.

    For the two-sided exponential exp(-2 pi dnu |t|):
    ``tau_1e_s`` is the 1/e decay time 1/(2 pi dnu), ``tau_fwhm_s`` its full
    width at half maximum ln2/(pi dnu), and ``tau_inverse_bandwidth_s`` the
    plain 1/dnu.
    """
    if not dnu_hz > 0:
        raise ValueError("bandwidth must be positive")
    return {
        "bandwidth_hz": dnu_hz,
        "tau_1e_s": 1.0 / (TWO_PI * dnu_hz),
        "tau_fwhm_s": math.log(2.0) / (math.pi * dnu_hz),
        "tau_inverse_bandwidth_s": 1.0 / dnu_hz,
    }


def format_bandwidth_report(label: str, dnu_hz: float) -> str:
    r = bandwidth_report(dnu_hz)
    return (
        f"{label}: bandwidth {r['bandwidth_hz'] / 1e6:.1f} MHz; "
        f"coherence time 1/(2 pi dnu) = {r['tau_1e_s'] * 1e9:.3f} ns, "
        f"FWHM ln2/(pi dnu) = {r['tau_fwhm_s'] * 1e9:.3f} ns, "
        f"1/dnu = {r['tau_inverse_bandwidth_s'] * 1e9:.3f} ns"
    )
