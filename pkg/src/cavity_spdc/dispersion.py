"""KTP dispersion: refractive and group indices, phase mismatch, cavity FSR.

Wavelengths are in metres at the public surface and converted to micrometres
only inside the Sellmeier polynomials. Spectral variables are angular
frequencies (rad/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import NoRoot, OutOfRange

C = 299_792_458.0

#: relative wavelength step of the central difference used for group indices
GROUP_INDEX_REL_STEP = 1e-5
#: bisection tolerance (deg C) for phase-matching temperature solves
TEMPERATURE_TOL = 1e-4

FIELDS = ("pump", "signal", "idler")


def omega_from_wavelength(wavelength):
    return 2.0 * math.pi * C / np.asarray(wavelength, dtype=float)


def wavelength_from_omega(omega):
    return 2.0 * math.pi * C / np.asarray(omega, dtype=float)


@dataclass(frozen=True)
class AxisSellmeier:
    """Room-temperature Sellmeier form plus a two-term thermo-optic correction.

    n0^2 = a + sum_j b_j / (1 - c_j / lam^2) - d * lam^2      (lam in um)
    dn   = n1(lam) (T - T_ref) + n2(lam) (T - T_ref)^2
    n1   = sum_m t1[m] / lam^m,  n2 = sum_m t2[m] / lam^m
    """

    a: float
    poles: tuple[tuple[float, float], ...] = ()
    d: float = 0.0
    t1: tuple[float, ...] = ()
    t2: tuple[float, ...] = ()
    t_ref: float = 25.0

    def index(self, lam_um, temperature):
        lam_um = np.asarray(lam_um, dtype=float)
        inv2 = 1.0 / lam_um**2
        n2 = self.a - self.d * lam_um**2
        for b, c in self.poles:
            n2 = n2 + b / (1.0 - c * inv2)
        n = np.sqrt(n2)
        dt = temperature - self.t_ref
        if self.t1:
            n = n + _inverse_poly(self.t1, lam_um) * dt
        if self.t2:
            n = n + _inverse_poly(self.t2, lam_um) * dt * dt
        return n


def _inverse_poly(coeffs, lam_um):
    out = np.zeros_like(lam_um)
    for m, cm in enumerate(coeffs):
        out = out + cm / lam_um**m
    return out


@dataclass(frozen=True)
class SellmeierModel:
    name: str
    axes: Mapping[str, AxisSellmeier]
    wavelength_range: tuple[float, float]  # metres
    temperature_range: tuple[float, float]  # deg C
    trims: Mapping[str, float] = field(default_factory=dict)

    def with_trims(self, **trims: float) -> "SellmeierModel":
        merged = dict(self.trims)
        merged.update(trims)
        return replace(self, trims=merged)

    def check_range(self, wavelength, temperature, margin: float = 0.0) -> None:
        lo, hi = self.wavelength_range
        w = np.asarray(wavelength, dtype=float)
        wmin = float(np.min(w)) * (1.0 - margin)
        wmax = float(np.max(w)) * (1.0 + margin)
        if not (lo <= wmin and wmax <= hi):
            raise OutOfRange(
                f"{self.name}: wavelength {wmin * 1e9:.3f}-{wmax * 1e9:.3f} nm outside "
                f"validity window {lo * 1e9:.1f}-{hi * 1e9:.1f} nm"
            )
        tlo, thi = self.temperature_range
        if not (tlo <= temperature <= thi):
            raise OutOfRange(
                f"{self.name}: temperature {temperature} C outside {tlo}-{thi} C"
            )


# Fan et al. / Koenig & Wong (2004) n_y, Fradkin et al. (1999) n_z, thermo-optic
# coefficients of Emanueli & Arie (2003). t1 entries are scaled by 1e-6, t2 by 1e-8.
_E6 = 1e-6
_E8 = 1e-8
KTP_FKE_V1 = SellmeierModel(
    name="ktp-fradkin-koenig-emanueli/v1",
    axes={
        "y": AxisSellmeier(
            a=2.09930,
            poles=((0.922683, 0.0467695),),
            d=0.0138408,
            t1=tuple(x * _E6 for x in (6.2897, 6.3061, -6.0629, 2.6486)),
            t2=tuple(x * _E8 for x in (-0.14445, 2.2244, -3.5770, 1.3470)),
        ),
        "z": AxisSellmeier(
            a=2.12725,
            poles=((1.18431, 5.14852e-2), (0.6603, 100.00507)),
            d=9.68956e-3,
            t1=tuple(x * _E6 for x in (9.9587, 9.9228, -8.9603, 4.1010)),
            t2=tuple(x * _E8 for x in (-1.1882, 10.459, -9.8136, 3.1481)),
        ),
    },
    wavelength_range=(0.53e-6, 1.57e-6),
    temperature_range=(20.0, 200.0),
)


def constant_index_model(n_y: float, n_z: float | None = None, name: str | None = None):
    """Dispersion-free model (n independent of wavelength and temperature)."""
    n_z = n_y if n_z is None else n_z
    return SellmeierModel(
        name=name or f"constant/{n_y:g}-{n_z:g}",
        axes={"y": AxisSellmeier(a=n_y**2), "z": AxisSellmeier(a=n_z**2)},
        wavelength_range=(0.2e-6, 5.0e-6),
        temperature_range=(-273.0, 1000.0),
    )


SELLMEIER_SETS: dict[str, SellmeierModel] = {
    KTP_FKE_V1.name: KTP_FKE_V1,
    "constant/1.8": constant_index_model(1.8, name="constant/1.8"),
}


def get_sellmeier(name: str) -> SellmeierModel:
    try:
        return SELLMEIER_SETS[name]
    except KeyError:
        known = ", ".join(sorted(SELLMEIER_SETS))
        raise KeyError(f"unknown Sellmeier set {name!r} (known: {known})") from None


def refractive_index(model: SellmeierModel, axis: str, wavelength, temperature: float):
    """Refractive index on crystal ``axis`` at ``wavelength`` (m), ``temperature`` (C)."""
    model.check_range(wavelength, temperature)
    lam_um = np.asarray(wavelength, dtype=float) * 1e6
    n = model.axes[axis].index(lam_um, temperature) + model.trims.get(axis, 0.0)
    return n if np.ndim(n) else float(n)


def group_index(model: SellmeierModel, axis: str, wavelength, temperature: float):
    """n_g = n - lam dn/dlam by a central difference of relative step 1e-5."""
    model.check_range(wavelength, temperature, margin=GROUP_INDEX_REL_STEP)
    lam = np.asarray(wavelength, dtype=float)
    h = lam * GROUP_INDEX_REL_STEP
    n = refractive_index(model, axis, lam, temperature)
    dn = (
        refractive_index(model, axis, lam + h, temperature)
        - refractive_index(model, axis, lam - h, temperature)
    ) / (2.0 * h)
    ng = n - lam * dn
    return ng if np.ndim(ng) else float(ng)


@dataclass(frozen=True)
class CrystalSpec:
    length: float  # m
    poling_period: float  # m; math.inf disables the grating term
    temperature: float  # deg C
    sellmeier: SellmeierModel = KTP_FKE_V1
    axes: Mapping[str, str] = field(
        default_factory=lambda: {"pump": "y", "signal": "z", "idler": "y"}
    )

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("crystal length must be positive")
        if not self.poling_period > 0:
            raise ValueError("poling period must be positive")
        if set(self.axes) != set(FIELDS):
            raise ValueError(f"axis assignment must cover exactly {FIELDS}")
        for fld, ax in self.axes.items():
            if ax not in self.sellmeier.axes:
                raise ValueError(f"{fld} mapped to unknown axis {ax!r}")

    def at_temperature(self, temperature: float) -> "CrystalSpec":
        return replace(self, temperature=temperature)

    def index(self, fld: str, omega, temperature: float | None = None):
        t = self.temperature if temperature is None else temperature
        return refractive_index(self.sellmeier, self.axes[fld], wavelength_from_omega(omega), t)

    def wavenumber(self, fld: str, omega, temperature: float | None = None):
        return self.index(fld, omega, temperature) * np.asarray(omega, dtype=float) / C


def wavevector_mismatch(crystal: CrystalSpec, omega_s, omega_i, temperature: float | None = None):
    """k_p - k_s - k_i + 2 pi / Lambda, with omega_p = omega_s + omega_i."""
    omega_s = np.asarray(omega_s, dtype=float)
    omega_i = np.asarray(omega_i, dtype=float)
    omega_p = omega_s + omega_i
    dk = (
        crystal.wavenumber("pump", omega_p, temperature)
        - crystal.wavenumber("signal", omega_s, temperature)
        - crystal.wavenumber("idler", omega_i, temperature)
    )
    if math.isfinite(crystal.poling_period):
        dk = dk + 2.0 * math.pi / crystal.poling_period
    return dk if np.ndim(dk) else float(dk)


def fsr(crystal: CrystalSpec, fld: str, wavelength, temperature: float | None = None):
    """Free spectral range (Hz) of the linear crystal cavity, c / (2 n_g L)."""
    t = crystal.temperature if temperature is None else temperature
    ng = group_index(crystal.sellmeier, crystal.axes[fld], wavelength, t)
    return C / (2.0 * ng * crystal.length)


def phase_matching_temperature(
    crystal: CrystalSpec,
    omega_s: float,
    omega_i: float,
    bracket: tuple[float, float] | None = None,
    scan_step: float = 0.5,
    tol: float = TEMPERATURE_TOL,
) -> float:
    """Temperature (C) where the mismatch vanishes, by scan + bisection.

    The scan over ``bracket`` (default: the model's validity range) locates
    sign changes; when there are several, the one closest to the crystal's
    nominal temperature wins.
    """
    lo, hi = bracket or crystal.sellmeier.temperature_range

    def dk(t):
        return wavevector_mismatch(crystal, omega_s, omega_i, temperature=t)

    grid = np.arange(lo, hi + 0.5 * scan_step, scan_step)
    grid[-1] = min(grid[-1], hi)
    values = np.array([dk(t) for t in grid])
    exact = np.flatnonzero(values == 0.0)
    candidates = [(grid[k], grid[k]) for k in exact]
    for k in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0):
        candidates.append((grid[k], grid[k + 1]))
    if not candidates:
        raise NoRoot(f"no sign change of the phase mismatch in {lo}-{hi} C")
    a, b = min(candidates, key=lambda ab: abs(0.5 * (ab[0] + ab[1]) - crystal.temperature))
    if a == b:
        return float(a)
    fa = dk(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = dk(m)
        if fm == 0.0:
            return float(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return float(0.5 * (a + b))


def calibrate_trims(
    crystal: CrystalSpec,
    targets_hz: Mapping[str, float],
    wavelengths: Mapping[str, float],
) -> SellmeierModel:
    """Return the crystal's model with additive index trims matching target FSRs.

    An additive trim shifts n and n_g by the same amount, so the trim is solved
    in closed form. Both fields of an axis must agree on a single trim; the
    first field listed for an axis sets it.
    """
    trims: dict[str, float] = {}
    for fld, target in targets_hz.items():
        axis = crystal.axes[fld]
        if axis in trims:
            continue
        ng_target = C / (2.0 * crystal.length * target)
        ng_now = group_index(crystal.sellmeier, axis, wavelengths[fld], crystal.temperature)
        trims[axis] = crystal.sellmeier.trims.get(axis, 0.0) + ng_target - ng_now
    return crystal.sellmeier.with_trims(**trims)
