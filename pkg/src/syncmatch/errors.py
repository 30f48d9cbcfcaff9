"""Exception taxonomy shared across the package.

Every failure a caller can reasonably branch on gets its own class.
The CLI maps these onto exit codes (numerical/topology failures exit 3,
I/O failures exit 4, bad inputs exit 2).
"""


class SyncMatchError(Exception):
    """Base class for all package-specific failures."""


class DegenerateScale(SyncMatchError):
    """Scaled transform has a nonpositive scale, so projection is undefined."""


class AmbiguousProjection(SyncMatchError):
    """Rotation block is rank deficient; nearest rotation is not unique."""


class EmptyPointcloud(SyncMatchError):
    """No valid depth sample on the requested pixel grid."""


class InvalidNeighborOrder(SyncMatchError):
    """Second-nearest distance is smaller than the nearest distance."""


class InsufficientTargets(SyncMatchError):
    """Target cloud has fewer than two points; ratio test needs two."""


class InsufficientSupport(SyncMatchError):
    """Too few (positively weighted) correspondences to fit a transform."""


class DegenerateGeometry(SyncMatchError):
    """Support points are collinear or otherwise underconstrain rotation."""


class NoConsensus(SyncMatchError):
    """No sampled hypothesis produced a single inlier."""


class DisconnectedGraph(SyncMatchError):
    """A frame has no positive-confidence edge, or the chain is broken."""

    def __init__(self, message: str, frame: int | None = None):
        super().__init__(message)
        self.frame = frame


class SynchronizationCollapse(SyncMatchError):
    """Confidence mass of a block vanished during synchronization."""

    def __init__(self, message: str, frame: int | None = None):
        super().__init__(message)
        self.frame = frame


class AdjacentPairFailure(SyncMatchError):
    """Alignment failed on an adjacent pair, which must stay connected."""


class EmptyReport(SyncMatchError):
    """Metric requested over an empty error list."""


class InputMismatch(SyncMatchError):
    """Predictions and ground truth disagree on frame count."""


class GenerationFailure(SyncMatchError):
    """Scene parameters admit no trajectory with the required overlap."""


class IOFailure(SyncMatchError):
    """File is unreadable, unwritable, or malformed."""
