"""Scenario bundles and the sectioned key-value scenario file format.

Units are part of the key names (``length_mm``, ``tau_ns`` ...). See
``scenarios/paper.ini`` for the full set of keys.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .dispersion import CrystalSpec, get_sellmeier, omega_from_wavelength
from .errors import CavitySPDCError, ScenarioError
from .spectral import (
    TWO_PI,
    CavitySpec,
    FilterSpec,
    FrequencyGrid,
    PumpSpec,
    central_cluster_grid,
    cw_pump_for,
    double_resonance,
)

DEFAULT_ETALONS = ((5e9, "lorentzian"), (14e9, "lorentzian"))


@dataclass(frozen=True)
class Scenario:
    name: str
    crystal: CrystalSpec
    cavity: CavitySpec
    pump: PumpSpec  # pump.tau already includes tau_scale
    grid: FrequencyGrid
    signal_wavelength: float
    idler_wavelength: float
    omega_s0: float  # central double resonance
    omega_i0: float
    filters: tuple[FilterSpec, ...] = ()
    tau_scale: float = 1.0
    relaxed_guard: bool = False
    description: str = ""
    grid_modes: int = 3

    def pump_for(self, tau: float, shape: str | None = None) -> PumpSpec:
        """Pump with nominal duration ``tau`` (s); the scenario's tau_scale is applied."""
        shape = shape or self.pump.shape
        if shape == "cw":
            return cw_pump_for(
                self.crystal, self.cavity, self.pump.center,
                self.signal_wavelength, self.idler_wavelength,
            )
        return replace(self.pump, shape=shape, tau=tau * self.tau_scale, cw_sigma=None)

    def etalons(self) -> tuple[FilterSpec, ...]:
        """Scenario filters, or the default 5 + 14 GHz idler etalon pair."""
        if self.filters:
            return self.filters
        return tuple(
            FilterSpec(center=self.omega_i0, fwhm_hz=bw, shape=shape, axis="idler")
            for bw, shape in DEFAULT_ETALONS
        )

    def with_grid(self, n: int | None = None, relaxed_guard: bool | None = None,
                  points_per_linewidth: float | None = None) -> "Scenario":
        kwargs = {}
        if points_per_linewidth is not None:
            kwargs["points_per_linewidth"] = points_per_linewidth
        grid = central_cluster_grid(
            self.crystal, self.cavity, self.omega_s0, self.omega_i0,
            modes=self.grid_modes, n=n, **kwargs,
        )
        return replace(
            self, grid=grid,
            relaxed_guard=self.relaxed_guard if relaxed_guard is None else relaxed_guard,
        )


# ----------------------------------------------------------------------- parsing

_SCHEMA = {
    "scenario": {"name", "description"},
    "crystal": {
        "sellmeier", "length_mm", "poling_um", "temperature_c", "pump_axis",
        "signal_axis", "idler_axis", "trim_y", "trim_z", "signal_wavelength_nm",
        "idler_wavelength_nm",
    },
    "cavity": {
        "r1_signal", "r1_idler", "r2_signal", "r2_idler",
        "pump_amplitude_reflectivity", "pump_phase_rad",
        "mirror_phase1_signal_rad", "mirror_phase2_signal_rad",
        "mirror_phase1_idler_rad", "mirror_phase2_idler_rad", "loss_per_m",
    },
    "pump": {"wavelength_nm", "shape", "tau_ns", "tau_scale", "cw_sigma_mhz"},
    "grid": {"modes", "points_per_linewidth", "n", "relaxed_guard"},
    "filters": None,  # free-form names
}


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, text: str, source: str):
        self.parser = parser
        self.lines = text.splitlines()
        self.source = source

    def where(self, section: str, key: str | None = None) -> str:
        sec_line = None
        for k, line in enumerate(self.lines, 1):
            stripped = line.strip()
            if stripped.lower() == f"[{section}]":
                sec_line = k
                continue
            if sec_line is not None and key is not None:
                if stripped.startswith("["):
                    break
                if re.match(rf"{re.escape(key)}\s*[=:]", stripped, re.IGNORECASE):
                    return f"{self.source}:{k}: [{section}] {key}"
        if sec_line is not None:
            return f"{self.source}:{sec_line}: [{section}]" + (f" {key}" if key else "")
        return f"{self.source}: [{section}]" + (f" {key}" if key else "")

    def fail(self, section, key, msg):
        raise ScenarioError(f"{self.where(section, key)}: {msg}")

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def get(self, section, key, default=None, required=False):
        if self.has(section, key):
            return self.parser.get(section, key).strip()
        if required:
            self.fail(section, key, "missing required field")
        return default

    def number(self, section, key, default=None, required=False, lo=None, hi=None,
               positive=False):
        raw = self.get(section, key, None, required)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            self.fail(section, key, f"expected a number, got {raw!r}")
        if math.isnan(value):
            self.fail(section, key, "NaN is not allowed")
        if positive and not value > 0:
            self.fail(section, key, f"must be positive, got {raw}")
        if lo is not None and value < lo or hi is not None and value > hi:
            self.fail(section, key, f"{raw} outside [{lo}, {hi}]")
        return value

    def boolean(self, section, key, default=False):
        raw = self.get(section, key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        self.fail(section, key, f"expected true/false, got {raw!r}")


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=(";", "#"), interpolation=None, strict=True
    )
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: parse error: {exc}") from None
    rd = _Reader(parser, text, source)

    for section in parser.sections():
        if section not in _SCHEMA:
            rd.fail(section, None, f"unknown section (expected one of {sorted(_SCHEMA)})")
        allowed = _SCHEMA[section]
        if allowed is None:
            continue
        for key in parser.options(section):
            if key not in allowed:
                rd.fail(section, key, "unknown field")
    for section in ("crystal", "cavity", "pump"):
        if not parser.has_section(section):
            raise ScenarioError(f"{source}: missing section [{section}]")

    # crystal
    try:
        model = get_sellmeier(rd.get("crystal", "sellmeier", required=True))
    except KeyError as exc:
        rd.fail("crystal", "sellmeier", exc.args[0])
    trims = {ax: rd.number("crystal", f"trim_{ax}", 0.0) for ax in ("y", "z")}
    trims = {ax: v for ax, v in trims.items() if ax in model.axes and v != 0.0}
    if trims:
        model = model.with_trims(**trims)
    poling_raw = rd.get("crystal", "poling_um", required=True)
    poling = math.inf if poling_raw.lower() in ("inf", "none") else rd.number(
        "crystal", "poling_um", positive=True) * 1e-6
    axes = {}
    for fld in ("pump", "signal", "idler"):
        ax = rd.get("crystal", f"{fld}_axis", {"pump": "y", "signal": "z", "idler": "y"}[fld])
        if ax not in model.axes:
            rd.fail("crystal", f"{fld}_axis", f"axis {ax!r} not in model {model.name}")
        axes[fld] = ax
    try:
        crystal = CrystalSpec(
            length=rd.number("crystal", "length_mm", required=True, positive=True) * 1e-3,
            poling_period=poling,
            temperature=rd.number("crystal", "temperature_c", required=True),
            sellmeier=model,
            axes=axes,
        )
    except ValueError as exc:
        rd.fail("crystal", None, str(exc))
    lam_s = rd.number("crystal", "signal_wavelength_nm", required=True, positive=True) * 1e-9
    lam_i = rd.number("crystal", "idler_wavelength_nm", required=True, positive=True) * 1e-9

    # cavity
    refl = {
        key: rd.number("cavity", key, required=True, lo=0.0, hi=1.0)
        for key in ("r1_signal", "r1_idler", "r2_signal", "r2_idler")
    }
    cavity = CavitySpec(
        r1={"signal": refl["r1_signal"], "idler": refl["r1_idler"]},
        r2={"signal": refl["r2_signal"], "idler": refl["r2_idler"]},
        pump_r=rd.number("cavity", "pump_amplitude_reflectivity", 0.0, lo=0.0, hi=1.0),
        pump_phase=rd.number("cavity", "pump_phase_rad", 0.0),
        mirror_phases={
            fld: (
                rd.number("cavity", f"mirror_phase1_{fld}_rad", 0.0),
                rd.number("cavity", f"mirror_phase2_{fld}_rad", 0.0),
            )
            for fld in ("signal", "idler")
        },
        loss=rd.number("cavity", "loss_per_m", 0.0, lo=0.0),
    )

    try:
        ws0, wi0 = double_resonance(crystal, cavity, lam_s, lam_i)
    except CavitySPDCError as exc:
        raise ScenarioError(f"{source}: {exc}") from None

    # pump
    shape = rd.get("pump", "shape", "gaussian")
    if shape not in ("cw", "gaussian", "square"):
        rd.fail("pump", "shape", f"expected cw, gaussian or square, got {shape!r}")
    wl_raw = rd.get("pump", "wavelength_nm", "auto")
    if wl_raw.lower() == "auto":
        center = ws0 + wi0
    else:
        center = float(omega_from_wavelength(rd.number("pump", "wavelength_nm", positive=True) * 1e-9))
    tau_scale = rd.number("pump", "tau_scale", 1.0, positive=True)
    tau_ns = rd.number("pump", "tau_ns", None, required=shape != "cw", positive=True)
    cw_mhz = rd.number("pump", "cw_sigma_mhz", None, positive=True)
    pump = PumpSpec(
        center=center,
        shape=shape,
        tau=None if tau_ns is None else tau_ns * 1e-9 * tau_scale,
        cw_sigma=None if cw_mhz is None else TWO_PI * cw_mhz * 1e6,
    )

    # grid
    modes = int(rd.number("grid", "modes", 3, positive=True))
    ppl = rd.number("grid", "points_per_linewidth", 8.0, positive=True)
    n = rd.number("grid", "n", None, lo=2)
    relaxed = rd.boolean("grid", "relaxed_guard", False)
    try:
        grid = central_cluster_grid(
            crystal, cavity, ws0, wi0, modes=modes, points_per_linewidth=ppl,
            n=None if n is None else int(n),
        )
    except CavitySPDCError as exc:
        raise ScenarioError(f"{source}: grid: {exc}") from None

    # filters
    filters = []
    if parser.has_section("filters"):
        for key in parser.options("filters"):
            filters.append(_parse_filter(rd, key, ws0, wi0))

    return Scenario(
        name=rd.get("scenario", "name", Path(source).stem),
        description=rd.get("scenario", "description", ""),
        crystal=crystal,
        cavity=cavity,
        pump=pump,
        grid=grid,
        signal_wavelength=lam_s,
        idler_wavelength=lam_i,
        omega_s0=ws0,
        omega_i0=wi0,
        filters=tuple(filters),
        tau_scale=tau_scale,
        relaxed_guard=relaxed,
        grid_modes=modes,
    )


def _parse_filter(rd: _Reader, key: str, ws0: float, wi0: float) -> FilterSpec:
    parts = [p.strip() for p in rd.get("filters", key).split(",")]
    if len(parts) < 3:
        rd.fail("filters", key, "expected 'axis, shape, fwhm_ghz[, offset_ghz[, fsr_ghz]]'")
    axis, shape = parts[0], parts[1]
    try:
        nums = [float(p) for p in parts[2:]]
    except ValueError:
        rd.fail("filters", key, f"non-numeric filter parameter in {parts[2:]}")
    fwhm = nums[0] * 1e9
    offset = nums[1] * 1e9 if len(nums) > 1 else 0.0
    fsr_hz = nums[2] * 1e9 if len(nums) > 2 else None
    base = ws0 if axis == "signal" else wi0
    try:
        return FilterSpec(center=base + TWO_PI * offset, fwhm_hz=fwhm, shape=shape,
                          axis=axis, fsr_hz=fsr_hz)
    except ValueError as exc:
        rd.fail("filters", key, str(exc))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    return parse_scenario(text, source=str(path))


def bundled_scenario_path(name: str) -> Path:
    ref = resources.files("cavity_spdc") / "scenarios" / f"{name}.ini"
    return Path(str(ref))


def bundled_scenario(name: str = "paper") -> Scenario:
    return load_scenario(bundled_scenario_path(name))
