"""Exception hierarchy shared by all modules.

CLI exit-code contract: configuration problems exit 2, verification
failures exit 1, numerical-integrity failures exit 3.
"""


class VarhardyError(Exception):
    """Base class for all package errors."""


class ConfigurationError(VarhardyError):
    """Invalid grid/lattice/filter/config parameters (exit code 2)."""


class ScaleRangeError(ConfigurationError):
    """A dyadic scale is not resolvable on the current grid."""


class FilterConstructionError(ConfigurationError):
    """Filter bank failed one of its construction invariants."""


class DomainError(VarhardyError):
    """An argument is outside the mathematical domain of an operation."""


class PreconditionError(VarhardyError):
    """A documented operation precondition does not hold."""


class HypothesisViolation(VarhardyError):
    """An operator fails the cancellation hypothesis a harness requires."""


class NumericalIntegrityError(VarhardyError):
    """Two independent computation routes disagree beyond tolerance (exit 3)."""
