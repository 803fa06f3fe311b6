"""Named error types raised across the package.

Every error carries a stable class name; the CLI prints that name on stderr.
"""


class MultichargeError(Exception):
    """Base class for all package errors."""


class KindMismatch(MultichargeError, TypeError):
    pass


class ShapeError(MultichargeError, ValueError):
    pass


class InvalidOperator(MultichargeError, ValueError):
    """A matrix failed a construction-time invariant (Hermiticity, trace, ...)."""


class Infeasible(MultichargeError):
    """Target charge values cannot be reached by any finite set of betas."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class NonCommutingBath(MultichargeError):
    pass


class NonCommuting(MultichargeError):
    pass


class NonCommutingHamiltonian(MultichargeError):
    pass


class NotInSubspace(MultichargeError):
    pass


class BoundaryViolation(MultichargeError):
    pass


class DimCap(MultichargeError):
    pass


class EmptyWindow(MultichargeError):
    pass


class IdentityCheckFailed(MultichargeError, ArithmeticError):
    """Two independent evaluations of the same identity disagree."""


class ParseError(MultichargeError, ValueError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason
