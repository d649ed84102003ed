"""Exception types shared across rcmlab modules."""


class RcmError(Exception):
    """Base class for all rcmlab errors."""


class PartitionMismatch(RcmError):
    """Boundary partition does not match the boundary of the graph."""


class TooLarge(RcmError):
    """Instance exceeds the exact enumeration budget."""


class NoDual(RcmError):
    """No planar dual is available for the graph."""


class InvalidArcs(RcmError):
    """Medial arcs do not define a valid Dobrushin domain."""


class InvalidConfiguration(RcmError):
    """Configuration violates the forced boundary states."""


class InvalidContour(RcmError):
    """Contour is not a closed path in the dual of the medial graph."""


class InvalidVertexSet(RcmError):
    """Vertex set is not made of medial vertices with four available edges."""


class InvalidQ(RcmError):
    """Cluster weight not supported by the requested sampler."""


class InvalidRange(RcmError):
    """Inconsistent sizes for a coupling or mixing computation."""


class GeometryOutOfRange(RcmError):
    """Event geometry does not fit inside the graph."""


class ZeroDenominator(RcmError):
    """Relative quantity with a vanishing reference probability."""


class UnknownExperiment(RcmError):
    """Experiment id not recognised by the harness."""
