"""Exception types shared across the package."""


class AoiCacheError(Exception):
    """Base class for all aoicache errors."""


class NonPositiveRate(AoiCacheError):
    """Radio parameters yield a non-positive service rate."""


class Unstable(AoiCacheError):
    """Offered load meets or exceeds service capacity; the queue diverges."""


class QueueDivergence(AoiCacheError):
    """Simulated in-system request count exceeded the configured cap."""

    def __init__(self, message: str, replication: int | None = None):
        super().__init__(message)
        self.replication = replication


class BracketFailure(AoiCacheError):
    """Root bracketing failed; inputs are outside the solvable range."""


class InfeasibleBudget(AoiCacheError):
    """No window assignment can satisfy the mean-age budget."""


class NonConvergence(AoiCacheError):
    """Iterative solver hit its iteration cap before settling."""


class ScenarioError(AoiCacheError):
    """A scenario file could not be parsed or validated."""
