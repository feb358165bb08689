"""Exception hierarchy shared across the package.

Two broad classes matter to callers (and to the CLI exit codes): problems
with the inputs we were given, and numerical failures while processing
otherwise valid inputs.
"""


class RtapropError(Exception):
    """Base class for all package errors."""


class InputError(RtapropError):
    """Invalid or malformed input (files, plans, tracks, configs)."""


class PlanError(InputError):
    """Flight-plan document fails validation."""


class AdsbError(InputError):
    """ADS-B track file fails validation."""


class ConfigError(InputError):
    """Run configuration is malformed or inconsistent."""


class DomainError(InputError):
    """Evaluation requested outside the interpolant's time domain."""


class NumericalError(RtapropError):
    """A numerical operation failed (singular solve, non-PSD matrix)."""
