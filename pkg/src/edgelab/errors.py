"""Exception hierarchy shared by all edgelab modules."""


class EdgeLabError(Exception):
    """Base class for every error raised by edgelab."""


class InvalidParams(EdgeLabError, ValueError):
    """Ensemble or operation parameters outside their admissible range."""


class DimensionMismatch(EdgeLabError, ValueError):
    pass


class CollisionError(EdgeLabError, RuntimeError):
    """Two eigenvalues came closer than the collision floor during a DBM step."""


class InsufficientSamples(EdgeLabError, ValueError):
    pass


class InvalidForest(EdgeLabError, ValueError):
    """The edge list is not a simple weighted forest with odd weights."""


class TooManyVertices(EdgeLabError, ValueError):
    pass


class NonPerturbativeError(EdgeLabError, ValueError):
    """A correction coefficient exceeds the perturbative-regime guard."""


class NoUpperHalfPlaneRoot(EdgeLabError, ArithmeticError):
    pass


class EdgeNotFound(EdgeLabError, ArithmeticError):
    pass


class QuadratureFailure(EdgeLabError, ArithmeticError):
    pass


class ConvergenceFailure(EdgeLabError, ArithmeticError):
    """The symmetric eigensolver did not converge."""


class EmptySample(EdgeLabError, ValueError):
    pass


class RegimeViolation(EdgeLabError, ValueError):
    """The sparsity parameter lies outside the regime an experiment targets."""


class ReplicateBudgetExceeded(EdgeLabError, RuntimeError):
    """More replicates failed than the configured failure budget allows."""


class ConfigError(EdgeLabError, ValueError):
    """A run configuration failed to parse or validate."""
