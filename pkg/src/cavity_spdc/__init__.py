"""Photon-pair spectra of a monolithic doubly-resonant ppKTP cavity.

Dispersion, joint spectral amplitudes, Schmidt decomposition, temporal fits
and pulse-length sweeps, plus the ``cavity-spdc`` command line.
"""

from .dispersion import CrystalSpec, fsr, group_index, phase_matching_temperature, refractive_index
from .errors import CavitySPDCError, ConfigError, NumericalFailure
from .scenario import Scenario, bundled_scenario, load_scenario, parse_scenario
from .schmidt import SchmidtResult, schmidt_decompose
from .spectral import CavitySpec, FilterSpec, FrequencyGrid, PumpSpec, build_jsa, finesse, linewidth
from .sweep import optimal_pulse_length, purity_sweep

__version__ = "0.1.0"

__all__ = [
    "CavitySPDCError", "CavitySpec", "ConfigError", "CrystalSpec", "FilterSpec", "FrequencyGrid",
    "NumericalFailure", "PumpSpec", "Scenario", "SchmidtResult", "build_jsa", "bundled_scenario",
    "finesse", "fsr", "group_index", "linewidth", "load_scenario", "optimal_pulse_length",
    "parse_scenario", "phase_matching_temperature", "purity_sweep", "refractive_index",
    "schmidt_decompose",
]
