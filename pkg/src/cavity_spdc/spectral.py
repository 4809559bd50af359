"""Cavity-modified joint spectral amplitude and derived spectra.

All spectral variables are angular frequencies (rad/s) unless a name ends in
``_hz``. The JSA is sampled on a rectangular (signal, idler) grid; rows index
the signal axis, columns the idler axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .dispersion import (
    C,
    CrystalSpec,
    fsr,
    omega_from_wavelength,
    wavelength_from_omega,
    wavevector_mismatch,
)
from .errors import DegenerateCavity, FilterOffGrid, NumericalFailure, ResolutionTooCoarse

TWO_PI = 2.0 * math.pi
PULSE_SHAPES = ("cw", "gaussian", "square")
SPECTRAL_FIELDS = ("signal", "idler")

#: the grid must resolve each cavity line with at least this many points per FWHM
GUARD_POINTS_PER_LINEWIDTH = 8
#: cw pumps are modelled as gaussians this many times narrower than the cavity line
CW_LINEWIDTH_RATIO = 1000.0
_ROW_BLOCK = 256


# --------------------------------------------------------------------------- pump


@dataclass(frozen=True)
class PumpSpec:
    """Pump centre (rad/s), pulse shape and intensity-FWHM duration ``tau`` (s).

    For gaussian pulses the field amplitude spectrum has standard deviation
    ``sigma_f = 2 sqrt(ln 2) / tau`` (transform-limited pulse whose temporal
    intensity FWHM is ``tau``). ``cw_sigma`` sets the spectral width used for
    a cw pump.
    """

    center: float
    shape: str = "gaussian"
    tau: float | None = None
    cw_sigma: float | None = None

    def __post_init__(self):
        if self.shape not in PULSE_SHAPES:
            raise ValueError(f"pump shape must be one of {PULSE_SHAPES}, got {self.shape!r}")
        if self.shape != "cw" and not (self.tau is not None and self.tau > 0):
            raise ValueError("pulsed pump needs a positive duration")
        if self.cw_sigma is not None and not self.cw_sigma > 0:
            raise ValueError("cw_sigma must be positive")

    @property
    def sigma_f(self) -> float:
        if self.shape == "cw":
            if self.cw_sigma is None:
                raise ValueError("cw pump without cw_sigma; use cw_pump_for()")
            return self.cw_sigma
        return 2.0 * math.sqrt(math.log(2.0)) / self.tau

    def with_tau(self, tau: float, shape: str | None = None) -> "PumpSpec":
        return replace(self, tau=tau, shape=shape or self.shape)


def pump_envelope(pump: PumpSpec, omega_s, omega_i):
    """Pump-induced amplitude as a function of the pair energy detuning."""
    detuning = np.asarray(omega_s, dtype=float) + np.asarray(omega_i, dtype=float) - pump.center
    if pump.shape == "square":
        # np.sinc(x) = sin(pi x)/(pi x); argument is detuning * tau / 2
        return np.sinc(detuning * pump.tau / TWO_PI)
    return np.exp(-(detuning**2) / (2.0 * pump.sigma_f**2))


# ------------------------------------------------------------------------- cavity


@dataclass(frozen=True)
class CavitySpec:
    """Facet reflectivities (intensity) per field, double-pass pump and loss.

    ``r1``/``r2`` map field name to the power reflectivity of the input (HR)
    and output-coupler facets. ``pump_r`` is the pump *amplitude*
    reflectivity of the back facet and ``pump_phase`` the relative phase of
    the returning pass. ``mirror_phases`` maps field to the pair of
    reflection phases (delta_1, delta_2).
    """

    r1: dict = field(default_factory=lambda: {"signal": 0.999, "idler": 0.999})
    r2: dict = field(default_factory=lambda: {"signal": 0.954, "idler": 0.954})
    pump_r: float = 1.0
    pump_phase: float = 0.0
    mirror_phases: dict = field(
        default_factory=lambda: {"signal": (0.0, 0.0), "idler": (0.0, 0.0)}
    )
    loss: float = 0.1  # 1/m

    def __post_init__(self):
        for name in SPECTRAL_FIELDS:
            for r in (self.r1[name], self.r2[name]):
                if not 0.0 <= r <= 1.0:
                    raise ValueError(f"{name} reflectivity {r} outside [0, 1]")
        if not 0.0 <= self.pump_r <= 1.0:
            raise ValueError("pump amplitude reflectivity outside [0, 1]")
        if self.loss < 0:
            raise ValueError("intracavity loss must be non-negative")

    @classmethod
    def no_cavity(cls) -> "CavitySpec":
        return cls(
            r1={"signal": 0.0, "idler": 0.0},
            r2={"signal": 0.0, "idler": 0.0},
            pump_r=0.0,
        )

    def round_trip_product(self, fld: str, length: float) -> float:
        return self.r1[fld] * self.r2[fld] * math.exp(-2.0 * self.loss * length)


def finesse(cavity: CavitySpec, fld: str, length: float) -> float:
    g = cavity.round_trip_product(fld, length)
    if g >= 1.0:
        raise DegenerateCavity(f"{fld}: R1 R2 exp(-2 alpha L) = {g} >= 1")
    return math.pi * g**0.25 / (1.0 - math.sqrt(g))


def round_trip_phase(crystal: CrystalSpec, cavity: CavitySpec, fld: str, omega):
    """Propagation phase 2 n w L / c plus both facet reflection phases."""
    omega = np.asarray(omega, dtype=float)
    d1, d2 = cavity.mirror_phases[fld]
    return 2.0 * crystal.index(fld, omega) * omega * crystal.length / C + d1 + d2


def airy(cavity: CavitySpec, crystal: CrystalSpec, fld: str, omega):
    f = finesse(cavity, fld, crystal.length)
    delta = round_trip_phase(crystal, cavity, fld, omega)
    return 1.0 / (1.0 + (4.0 * f * f / math.pi**2) * np.sin(0.5 * delta) ** 2)


def linewidth(cavity: CavitySpec, crystal: CrystalSpec, fld: str, wavelength: float) -> float:
    """Cavity FWHM (Hz) = FSR / finesse; infinite without a cavity."""
    f = finesse(cavity, fld, crystal.length)
    if f == 0.0:
        return math.inf
    return fsr(crystal, fld, wavelength) / f


def double_pass_factor(cavity: CavitySpec, dk, length: float):
    r = cavity.pump_r
    arg = 1.0 + r * r + 2.0 * r * np.cos(np.asarray(dk) * length + cavity.pump_phase)
    return np.sqrt(np.maximum(arg, 0.0))


def phase_matching_from_mismatch(dk, length: float):
    x = 0.5 * np.asarray(dk, dtype=float) * length
    return np.sinc(x / math.pi) * np.exp(1j * x)


def phase_matching(crystal: CrystalSpec, omega_s, omega_i):
    """sinc(dk L/2) exp(i dk L/2) for the single forward pass."""
    return phase_matching_from_mismatch(
        wavevector_mismatch(crystal, omega_s, omega_i), crystal.length
    )


def double_resonance(
    crystal: CrystalSpec, cavity: CavitySpec, signal_wavelength: float, idler_wavelength: float
) -> tuple[float, float]:
    """Signal and idler cavity resonances closest to the nominal wavelengths.

    Returns angular frequencies. Pumping at their sum puts the pair emission
    on a double resonance, which is what tuning the crystal temperature does
    in the laboratory.
    """
    out = []
    for fld, lam in (("signal", signal_wavelength), ("idler", idler_wavelength)):
        w0 = float(omega_from_wavelength(lam))
        delta0 = float(round_trip_phase(crystal, cavity, fld, w0))
        m = round(delta0 / TWO_PI)
        step = TWO_PI * fsr(crystal, fld, lam)

        def g(w, m=m, fld=fld):
            return float(round_trip_phase(crystal, cavity, fld, w)) - TWO_PI * m

        out.append(brentq(g, w0 - step, w0 + step, xtol=1e-6, rtol=1e-15))
    return out[0], out[1]


# --------------------------------------------------------------------------- grid


@dataclass(frozen=True)
class FrequencyGrid:
    signal_center: float
    signal_span: float
    n_signal: int
    idler_center: float
    idler_span: float
    n_idler: int

    def __post_init__(self):
        if self.n_signal < 2 or self.n_idler < 2:
            raise ValueError("grid needs at least two points per axis")
        if not (self.signal_span > 0 and self.idler_span > 0):
            raise ValueError("grid spans must be positive")

    @property
    def signal_axis(self) -> np.ndarray:
        return self.signal_center + np.linspace(-0.5, 0.5, self.n_signal) * self.signal_span

    @property
    def idler_axis(self) -> np.ndarray:
        return self.idler_center + np.linspace(-0.5, 0.5, self.n_idler) * self.idler_span

    @property
    def signal_step(self) -> float:
        return self.signal_span / (self.n_signal - 1)

    @property
    def idler_step(self) -> float:
        return self.idler_span / (self.n_idler - 1)

    @property
    def cell(self) -> float:
        return self.signal_step * self.idler_step

    def axis(self, fld: str) -> np.ndarray:
        return self.signal_axis if fld == "signal" else self.idler_axis

    def scaled(self, factor: float) -> "FrequencyGrid":
        """Same spans with (n - 1) multiplied by ``factor``."""
        return replace(
            self,
            n_signal=int(round((self.n_signal - 1) * factor)) + 1,
            n_idler=int(round((self.n_idler - 1) * factor)) + 1,
        )


def central_cluster_grid(
    crystal: CrystalSpec,
    cavity: CavitySpec,
    omega_s0: float,
    omega_i0: float,
    modes: int = 3,
    points_per_linewidth: float = GUARD_POINTS_PER_LINEWIDTH,
    n: int | None = None,
) -> FrequencyGrid:
    """Grid spanning ``modes`` free spectral ranges per axis around a double resonance.

    Without ``n``, each axis gets the smallest odd point count meeting
    ``points_per_linewidth``. With ``n`` the grid is n x n.
    """
    spans, counts = [], []
    for fld, w0 in (("signal", omega_s0), ("idler", omega_i0)):
        lam = float(wavelength_from_omega(w0))
        span = modes * TWO_PI * fsr(crystal, fld, lam)
        spans.append(span)
        if n is None:
            lw = TWO_PI * linewidth(cavity, crystal, fld, lam)
            k = math.ceil(span / (lw / points_per_linewidth))
            counts.append(k + 1 if k % 2 == 0 else k + 2)
        else:
            counts.append(n)
    return FrequencyGrid(omega_s0, spans[0], counts[0], omega_i0, spans[1], counts[1])


def check_resolution(crystal: CrystalSpec, cavity: CavitySpec, grid: FrequencyGrid) -> None:
    for fld, step, w0 in (
        ("signal", grid.signal_step, grid.signal_center),
        ("idler", grid.idler_step, grid.idler_center),
    ):
        lw = linewidth(cavity, crystal, fld, float(wavelength_from_omega(w0)))
        if not math.isfinite(lw):
            continue
        limit = TWO_PI * lw / GUARD_POINTS_PER_LINEWIDTH
        if step > limit * (1.0 + 1e-12):
            raise ResolutionTooCoarse(
                f"{fld} grid step {step / TWO_PI / 1e6:.2f} MHz exceeds linewidth/"
                f"{GUARD_POINTS_PER_LINEWIDTH} = {limit / TWO_PI / 1e6:.2f} MHz"
            )


# ---------------------------------------------------------------------------- JSA


@dataclass(frozen=True)
class JSAGrid:
    amplitude: np.ndarray  # complex, shape (n_signal, n_idler)
    grid: FrequencyGrid
    normalized: bool = False
    guard_relaxed: bool = False

    @property
    def signal_axis(self) -> np.ndarray:
        return self.grid.signal_axis

    @property
    def idler_axis(self) -> np.ndarray:
        return self.grid.idler_axis

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        return float(np.sum(self.intensity) * self.grid.cell)

    def normalize(self) -> "JSAGrid":
        total = self.norm()
        if not total > 0:
            raise ValueError("cannot normalise an all-zero JSA")
        return replace(self, amplitude=self.amplitude / math.sqrt(total), normalized=True)


def cw_pump_for(
    crystal: CrystalSpec,
    cavity: CavitySpec,
    center: float,
    signal_wavelength: float,
    idler_wavelength: float,
) -> PumpSpec:
    lw = min(
        linewidth(cavity, crystal, "signal", signal_wavelength),
        linewidth(cavity, crystal, "idler", idler_wavelength),
    )
    if not math.isfinite(lw):
        raise ValueError("cw pump width is tied to the cavity linewidth; give cw_sigma")
    return PumpSpec(center=center, shape="cw", cw_sigma=TWO_PI * lw / CW_LINEWIDTH_RATIO)


def build_jsa(
    crystal: CrystalSpec,
    cavity: CavitySpec,
    pump: PumpSpec,
    grid: FrequencyGrid,
    relaxed_guard: bool = False,
    normalize: bool = True,
) -> JSAGrid:
    """psi = sqrt(A_s A_i) * double-pass factor * pump envelope * phase matching."""
    if not relaxed_guard:
        check_resolution(crystal, cavity, grid)
    ws = grid.signal_axis
    wi = grid.idler_axis
    sqrt_as = np.sqrt(airy(cavity, crystal, "signal", ws))
    sqrt_ai = np.sqrt(airy(cavity, crystal, "idler", wi))
    amp = np.empty((ws.size, wi.size), dtype=complex)
    for start in range(0, ws.size, _ROW_BLOCK):
        block = ws[start : start + _ROW_BLOCK, None]
        dk = wavevector_mismatch(crystal, block, wi[None, :])
        amp[start : start + _ROW_BLOCK] = (
            pump_envelope(pump, block, wi[None, :])
            * double_pass_factor(cavity, dk, crystal.length)
            * phase_matching_from_mismatch(dk, crystal.length)
        )
    amp *= sqrt_as[:, None]
    amp *= sqrt_ai[None, :]
    if not np.all(np.isfinite(amp)):
        raise NumericalFailure("non-finite JSA entries")
    jsa = JSAGrid(amp, grid, normalized=False, guard_relaxed=relaxed_guard)
    return jsa.normalize() if normalize else jsa


# ------------------------------------------------------------------------ filters


@dataclass(frozen=True)
class FilterSpec:
    """Spectral filter on one arm.

    ``fwhm_hz`` is the intensity-transmission FWHM. Airy filters also need the
    etalon free spectral range ``fsr_hz``.
    """

    center: float
    fwhm_hz: float
    shape: str = "lorentzian"
    axis: str = "idler"
    fsr_hz: float | None = None

    def __post_init__(self):
        if not self.fwhm_hz > 0:
            raise ValueError("filter bandwidth must be positive")
        if self.shape not in ("lorentzian", "airy"):
            raise ValueError(f"unknown filter shape {self.shape!r}")
        if self.axis not in SPECTRAL_FIELDS:
            raise ValueError(f"filter axis must be signal or idler, got {self.axis!r}")
        if self.shape == "airy" and not (self.fsr_hz and self.fsr_hz > self.fwhm_hz):
            raise ValueError("airy filter needs fsr_hz larger than fwhm_hz")

    def intensity_transmission(self, omega):
        df = (np.asarray(omega, dtype=float) - self.center) / TWO_PI
        if self.shape == "lorentzian":
            return 1.0 / (1.0 + (2.0 * df / self.fwhm_hz) ** 2)
        fin = self.fsr_hz / self.fwhm_hz
        return 1.0 / (1.0 + (2.0 * fin / math.pi) ** 2 * np.sin(math.pi * df / self.fsr_hz) ** 2)


def apply_filter(jsa: JSAGrid, filters: Sequence[FilterSpec]) -> JSAGrid:
    amp = jsa.amplitude.copy()
    for flt in filters:
        ax = jsa.grid.axis(flt.axis)
        if not ax[0] <= flt.center <= ax[-1]:
            raise FilterOffGrid(
                f"{flt.axis} filter centre {flt.center:.6e} rad/s outside grid "
                f"[{ax[0]:.6e}, {ax[-1]:.6e}]"
            )
        t = np.sqrt(flt.intensity_transmission(ax))
        if flt.axis == "signal":
            amp *= t[:, None]
        else:
            amp *= t[None, :]
    return replace(jsa, amplitude=amp).normalize()


def marginal(jsa: JSAGrid, axis: str) -> np.ndarray:
    """Single-photon spectral density; sums to 1 against the axis step when normalised."""
    inten = jsa.intensity
    if axis == "signal":
        return inten.sum(axis=1) * jsa.grid.idler_step
    return inten.sum(axis=0) * jsa.grid.signal_step


# ------------------------------------------------------------------ wide spectrum


@dataclass(frozen=True)
class ClusterSpectrum:
    signal_detuning_hz: np.ndarray
    idler_detuning_hz: np.ndarray
    intensity: np.ndarray
    envelope: np.ndarray  # |phase matching|^2 * double-pass^2, without cavity combs


def cluster_spectrum(
    crystal: CrystalSpec,
    cavity: CavitySpec,
    omega_p0: float,
    omega_s0: float,
    span_hz: float,
    step_hz: float | None = None,
) -> ClusterSpectrum:
    """Pair emission along the cw energy-conservation line.

    The signal is swept across ``omega_s0 +/- span_hz/2`` (Hz) while the idler
    follows ``omega_p0 - omega_s``. Default sampling is 16 points per cavity
    linewidth.
    """
    if step_hz is None:
        lam_s = float(wavelength_from_omega(omega_s0))
        lam_i = float(wavelength_from_omega(omega_p0 - omega_s0))
        lw = min(
            linewidth(cavity, crystal, "signal", lam_s),
            linewidth(cavity, crystal, "idler", lam_i),
        )
        step_hz = lw / 16.0 if math.isfinite(lw) else span_hz / 4096.0
    n = int(math.ceil(span_hz / step_hz)) + 1
    det = np.linspace(-0.5, 0.5, n) * span_hz
    ws = omega_s0 + TWO_PI * det
    wi = omega_p0 - ws
    dk = wavevector_mismatch(crystal, ws, wi)
    env = np.abs(phase_matching_from_mismatch(dk, crystal.length)) ** 2 * (
        double_pass_factor(cavity, dk, crystal.length) ** 2
    )
    combs = airy(cavity, crystal, "signal", ws) * airy(cavity, crystal, "idler", wi)
    idler_det = (wi - (omega_p0 - omega_s0)) / TWO_PI
    return ClusterSpectrum(det, idler_det, combs * env, env)
