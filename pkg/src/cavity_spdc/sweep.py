"""Purity versus pump pulse length, optimum search and efficiency budgets."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dispersion import fsr
from .errors import NoInteriorMaximum, WindowOffGrid
from .schmidt import SchmidtResult, schmidt_decompose
from .scenario import Scenario
from .spectral import TWO_PI, JSAGrid, apply_filter, build_jsa

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
THREADS_ENV = "CAVITY_SPDC_THREADS"


def worker_count() -> int:
    """Worker cap from CAVITY_SPDC_THREADS (0 or unset = one per CPU)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class SweepRow:
    tau: float  # s, nominal
    K: float
    P: float
    central_fraction: float


@dataclass(frozen=True)
class SweepTable:
    rows: tuple[SweepRow, ...]
    shape: str
    filtered: bool
    scenario: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        taus = [r.tau for r in self.rows]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("sweep rows must have strictly increasing tau")

    @property
    def taus(self) -> np.ndarray:
        return np.array([r.tau for r in self.rows])

    @property
    def purities(self) -> np.ndarray:
        return np.array([r.P for r in self.rows])

    def to_csv(self) -> str:
        lines = ["tau_p_ns,K,P,central_fraction"]
        for r in self.rows:
            lines.append(f"{r.tau * 1e9:.6f},{r.K:.10f},{r.P:.10f},{r.central_fraction:.10f}")
        return "\n".join(lines) + "\n"


def central_window(scenario: Scenario) -> tuple[float, float, float, float]:
    """+/- half an FSR around the central double resonance on each axis (rad/s)."""
    half_s = 0.5 * TWO_PI * fsr(scenario.crystal, "signal", scenario.signal_wavelength)
    half_i = 0.5 * TWO_PI * fsr(scenario.crystal, "idler", scenario.idler_wavelength)
    return (
        scenario.omega_s0 - half_s, scenario.omega_s0 + half_s,
        scenario.omega_i0 - half_i, scenario.omega_i0 + half_i,
    )


def central_mode_fraction(jsa: JSAGrid, window: Sequence[float]) -> float:
    """Share of the joint intensity inside ``(s_lo, s_hi, i_lo, i_hi)``."""
    s_lo, s_hi, i_lo, i_hi = window
    ws, wi = jsa.signal_axis, jsa.idler_axis
    tol_s = 1e-9 * jsa.grid.signal_step
    tol_i = 1e-9 * jsa.grid.idler_step
    if s_lo < ws[0] - tol_s or s_hi > ws[-1] + tol_s or i_lo < wi[0] - tol_i or i_hi > wi[-1] + tol_i:
        raise WindowOffGrid("mode window extends beyond the frequency grid")
    ms = (ws >= s_lo) & (ws <= s_hi)
    mi = (wi >= i_lo) & (wi <= i_hi)
    inten = jsa.intensity
    total = float(inten.sum())
    return float(inten[np.ix_(ms, mi)].sum()) / total


def purity_point(
    scenario: Scenario, tau: float, shape: str = "gaussian", filtered: bool = False
) -> tuple[SchmidtResult, float]:
    """Build, optionally filter and decompose one JSA; returns (result, central fraction)."""
    pump = scenario.pump_for(tau, shape)
    jsa = build_jsa(
        scenario.crystal, scenario.cavity, pump, scenario.grid,
        relaxed_guard=scenario.relaxed_guard,
    )
    if filtered:
        jsa = apply_filter(jsa, scenario.etalons())
    frac = central_mode_fraction(jsa, central_window(scenario))
    result = schmidt_decompose(jsa)
    return result, frac


def purity_sweep(
    scenario: Scenario,
    taus: Sequence[float],
    shape: str = "gaussian",
    filtered: bool = False,
    workers: int | None = None,
) -> SweepTable:
    taus = [float(t) for t in taus]
    if any(not t > 0 for t in taus):
        raise ValueError("pulse durations must be positive")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("pulse durations must be strictly increasing")

    def row(tau):
        res, frac = purity_point(scenario, tau, shape, filtered)
        return SweepRow(tau, res.K, res.P, frac)

    workers = worker_count() if workers is None else workers
    if workers > 1 and len(taus) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, taus))  # map preserves input order
    else:
        rows = [row(t) for t in taus]
    return SweepTable(
        tuple(rows), shape, filtered, scenario.name,
        meta={"grid": (scenario.grid.n_signal, scenario.grid.n_idler),
              "guard_relaxed": scenario.relaxed_guard},
    )


def default_taus() -> np.ndarray:
    """0.3 to 2.0 ns in 0.1 ns steps."""
    return np.round(np.arange(3, 21) * 0.1, 10) * 1e-9


def golden_section_max(
    fun: Callable[[float], float], lo: float, hi: float, tol: float
) -> tuple[float, float]:
    """Maximise a unimodal ``fun`` on [lo, hi] until the bracket is below ``tol``.

    Raises NoInteriorMaximum when the midpoint does not beat both endpoints.
    """
    cache: dict[float, float] = {}

    def f(x):
        if x not in cache:
            cache[x] = fun(x)
        return cache[x]

    mid = 0.5 * (lo + hi)
    f_lo, f_hi, f_mid = f(lo), f(hi), f(mid)
    if not (f_mid > f_lo and f_mid > f_hi):
        best = lo if f_lo >= f_hi else hi
        raise NoInteriorMaximum(
            f"no interior maximum in [{lo:.4g}, {hi:.4g}]; best endpoint {best:.4g} "
            f"with value {max(f_lo, f_hi):.6f}",
            tau=best, purity=max(f_lo, f_hi),
        )
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    while b - a > tol:
        if f(c) >= f(d):
            b, d = d, c
            c = b - GOLDEN * (b - a)
        else:
            a, c = c, d
            d = a + GOLDEN * (b - a)
    f(0.5 * (a + b))
    best_x = max(cache, key=cache.get)
    return best_x, cache[best_x]


def optimal_pulse_length(
    scenario: Scenario,
    shape: str = "gaussian",
    filtered: bool = False,
    bracket: tuple[float, float] = (0.2e-9, 3.0e-9),
    tol: float = 0.01e-9,
) -> tuple[float, float]:
    """Pulse length (s) maximising spectral purity, and that purity."""

    def purity_of(tau):
        return purity_point(scenario, tau, shape, filtered)[0].P

    return golden_section_max(purity_of, bracket[0], bracket[1], tol)


# --------------------------------------------------------------------- budgets


def escape_efficiency(cavity, length: float, fld: str) -> float:
    """Output-coupler share of the round-trip losses, (1-R2)/((1-R1)+(1-R2)+2 alpha L)."""
    out = 1.0 - cavity.r2[fld]
    total = (1.0 - cavity.r1[fld]) + out + 2.0 * cavity.loss * length
    if total <= 0:
        return 0.0
    return min(max(out / total, 0.0), 1.0)


def heralding_budget(
    escape: float, fiber_coupling: float, filter_transmission: float, detector_efficiency: float
) -> tuple[float, float]:
    """Raw heralding efficiency and the detector-corrected value."""
    factors = (escape, fiber_coupling, filter_transmission, detector_efficiency)
    if any(not 0.0 <= f <= 1.0 for f in factors):
        raise ValueError("efficiency factors must lie in [0, 1]")
    raw = escape * fiber_coupling * filter_transmission * detector_efficiency
    corrected = raw / detector_efficiency if detector_efficiency > 0 else 0.0
    return raw, corrected
