class NoGrowthError(Exception):
    pass


class AddressError(NoGrowthError, ValueError):
    """Malformed or out-of-range vertex address."""


class AdjacencyError(NoGrowthError, ValueError):
    """Two vertices expected to be adjacent are not."""


class BoundaryError(NoGrowthError):
    """The answer depends on vertices beyond the truncation (or an open cluster)."""


class ValidationError(NoGrowthError, ValueError):
    pass


class ConfigurationError(NoGrowthError, ValueError):
    pass


class ConstraintError(NoGrowthError):
    """Marked-vertex constraints cannot be met."""


class GenerationFailure(NoGrowthError):
    """The girth-targeted generator gave up.

    ``best_girth`` is the largest girth reached by any completed attempt
    (0 when no attempt produced a full graph).
    """

    def __init__(self, message, best_girth=0, cluster=None):
        super().__init__(message)
        self.best_girth = best_girth
        self.cluster = cluster


class StructuralError(NoGrowthError):
    """A construction invariant was violated (a bug trap)."""


class ConnectivityError(NoGrowthError):
    pass


class TruncationTooSmall(NoGrowthError):
    pass


class InsufficientData(NoGrowthError):
    pass
