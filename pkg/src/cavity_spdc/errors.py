"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures to
structured exit statuses (2 = usage/config, 3 = numerical failure).
"""

from __future__ import annotations


class CavitySPDCError(Exception):
    exit_code = 3


class ConfigError(CavitySPDCError):
    """Bad user input: scenario file, option value or data file."""

    exit_code = 2


class ScenarioError(ConfigError):
    pass


class OutOfRange(ConfigError):
    """Dispersion model evaluated outside its validity window."""


class FilterOffGrid(ConfigError):
    pass


class WindowOffGrid(ConfigError):
    pass


class ResolutionTooCoarse(ConfigError):
    pass


class DomainError(ConfigError):
    pass


class DegenerateData(ConfigError):
    pass


class NumericalFailure(CavitySPDCError):
    pass


class NoRoot(NumericalFailure):
    pass


class DegenerateCavity(NumericalFailure):
    pass


class NonConvergence(NumericalFailure):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NoInteriorMaximum(NumericalFailure):
    """Raised when the best purity sits on a bracket endpoint.

    ``tau`` and ``purity`` describe that boundary optimum.
    """

    def __init__(self, message, tau=None, purity=None):
        super().__init__(message)
        self.tau = tau
        self.purity = purity
