"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """Two fields that must share a grid were built on different grids."""


class MultiplierDomainError(ValueError):
    """A Fourier symbol produced a non-finite value at a grid frequency."""


class DivergenceError(RuntimeError):
    """An iteration failed to reach its tolerance within the step budget."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PositivityViolationError(RuntimeError):
    """A quantity required to be positive came out significantly negative."""


class StaleGroundStateError(ValueError):
    """A ground state no longer satisfies its equation on this grid."""


class SolvabilityError(RuntimeError):
    """A linear solve's compatibility condition failed.

    The offending inner product is recorded so the caller can see which
    projection was violated and by how much.
    """

    def __init__(self, message, inner_product=None, label=None):
        super().__init__(message)
        self.inner_product = inner_product
        self.label = label


class DegeneracyError(RuntimeError):
    """An augmented linear system was numerically singular."""


class NumericsError(RuntimeError):
    """A matrix that must be symmetric (or a form that must be real) is not."""


class InconsistencyError(RuntimeError):
    """A measured identity that should hold automatically failed badly."""


class InstabilityError(RuntimeError):
    """Time stepping produced non-finite values; last good state attached."""

    def __init__(self, message, last_state=None, last_time=None):
        super().__init__(message)
        self.last_state = last_state
        self.last_time = last_time


class ConservationViolationError(RuntimeError):
    """A monitored conserved quantity drifted beyond its configured bound."""


class SearchFailureError(RuntimeError):
    """All restarts of a root search failed to converge."""


class BasinError(RuntimeError):
    """A Newton iteration left its convergence basin."""

    def __init__(self, message, residuals=None, iterations=None):
        super().__init__(message)
        self.residuals = residuals
        self.iterations = iterations


class BlowupReached(Exception):
    """Signal (not an error): the scale parameter hit zero inside the window."""
