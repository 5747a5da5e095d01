"""Exception hierarchy."""


class SuffkitError(Exception):
    """Base class for all errors raised by suffkit."""


class ShapeError(SuffkitError, ValueError):
    """Operands have incompatible dimensions."""


class CapacityError(SuffkitError, ValueError):
    """A construction would exceed the configured dimension cap."""


class ValidationError(SuffkitError, ValueError):
    """An input violates a type invariant (Hermiticity, normalization, ...)."""


class PreconditionError(SuffkitError, ValueError):
    """An operation was called outside its domain."""


class NumericalError(SuffkitError, RuntimeError):
    """An iterative routine failed to converge.

    ``residual`` carries the last measured residual when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CertificateInvalidError(SuffkitError, RuntimeError):
    """A certificate failed re-evaluation; indicates a solver defect."""


class NonCommutingError(SuffkitError, ValueError):
    """A family of operators is not simultaneously diagonalizable."""

    def __init__(self, pair, norm):
        super().__init__(
            f"operators {pair[0]} and {pair[1]} do not commute "
            f"(commutator norm {norm:.3e})"
        )
        self.pair = pair
        self.norm = norm


class NotInformationallyCompleteError(PreconditionError):
    """A frame does not span the operator space."""

    def __init__(self, rank, required):
        super().__init__(f"frame has rank {rank}, {required} required")
        self.rank = rank
        self.required = required


class NotExtendableError(SuffkitError, RuntimeError):
    """A morphism admits no realizing POVM for its extension."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit
