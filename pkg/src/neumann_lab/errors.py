"""Exception types shared across the lab."""


class DomainError(ValueError):
    """A function was applied outside the set where it is defined and finite."""


class NonCommutingError(ValueError):
    """A family that must commute pairwise does not."""

    def __init__(self, message, pair=None, norm=None):
        super().__init__(message)
        self.pair = pair
        self.norm = norm


class CommutingOperatorsError(ValueError):
    """The operators commute, so no non-commutation witness exists.

    This is the Abelian outcome, not a numerical failure.
    """


class AmbiguityError(ValueError):
    """A relabelling map merges two distinct eigenvalue clusters."""


class QuadratureAccuracyError(RuntimeError):
    """Quadrature results moved too much when the rule was refined."""

    def __init__(self, message, shift=None):
        super().__init__(message)
        self.shift = shift


class EstimationError(RuntimeError):
    """Jet-order estimation found no stable scaling law.

    The raw probe responses are attached as ``data``.
    """

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data
