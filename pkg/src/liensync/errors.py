"""Exception hierarchy: domain errors (bad inputs) vs. numerical failures.

The CLI maps DomainError to exit code 1 and NumericalError to exit code 2.
"""


class LiensyncError(Exception):
    """Base class for all library errors."""


class DomainError(LiensyncError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class NoSolutionError(DomainError):
    """The work-minimisation problem has no solution for these inputs.

    Raised when a start or endpoint sits inside the active region |x1| < b,
    or when the two endpoints lie in opposite half-planes.
    """


class SystemValidationError(DomainError):
    """An oscillator definition violates the limit-cycle existence conditions."""

    def __init__(self, report):
        self.report = report
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        super().__init__(f"system validation failed: {failed}")


class ContractViolation(LiensyncError, ValueError):
    """Caller broke a documented precondition (e.g. mismatched array lengths)."""


class NumericalError(LiensyncError):
    """A numerical procedure failed to converge or exhausted its budget."""


class IntegrationError(NumericalError):
    """Time integration failed; carries whatever partial trajectory exists."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class EventNotFoundError(NumericalError):
    """No section crossing occurred before the time horizon."""


class CycleNotFoundError(NumericalError):
    """The Poincare fixed-point iteration did not converge."""


class SingularForceError(NumericalError):
    """The synthesized force is singular (h vanishes on the open path)."""


class OracleFailure(NumericalError):
    """An independent verification oracle failed to produce a trusted value."""
