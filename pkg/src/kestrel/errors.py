"""Exception taxonomy shared across the toolkit.

Every error raised by kestrel derives from :class:`KestrelError`, so callers
can catch the whole family (the evolutionary search does exactly that when
rejecting candidates).
"""


class KestrelError(Exception):
    """Base class for all kestrel errors."""


class DimensionMismatch(KestrelError):
    """Matrix/vector dimensions inconsistent with the model."""


class NonFinite(KestrelError):
    """A NaN or Inf appeared where finite values are required."""


class ZeroRange(KestrelError):
    """Observation position norm too small to define a radial direction."""


class SingularInnovation(KestrelError):
    """Innovation covariance failed its conditioning check."""


class EmptyTrajectory(KestrelError):
    """Operation requires at least one observation."""


class InsufficientData(KestrelError):
    """Too few residual samples for covariance estimation."""


class DegenerateVelocity(KestrelError):
    """Simulator could not draw a usable velocity after repeated attempts."""


class RuleSyntaxError(KestrelError):
    """Malformed rule-program text."""

    def __init__(self, message, position=None):
        super().__init__(f"{message}" + (f" (at {position})" if position is not None else ""))
        self.position = position


class UnknownPrimitive(KestrelError):
    """Rule program references a primitive outside the closed set."""

    def __init__(self, name):
        super().__init__(f"unknown primitive: {name!r}")
        self.name = name


class DimensionError(KestrelError):
    """Rule expression is not scalar-typed where a scalar is required."""

    def __init__(self, node, message):
        super().__init__(f"{message}: {node!r}")
        self.node = node


class NumericalFault(KestrelError):
    """Rule execution produced a non-finite intermediate."""

    def __init__(self, stage, detail=""):
        super().__init__(f"non-finite value at stage {stage!r}" + (f": {detail}" if detail else ""))
        self.stage = stage


class EmptyDatabase(KestrelError):
    """Island database has no candidates to sample."""


class SingularMoments(KestrelError):
    """Observation second-moment matrix is numerically singular."""


class ZeroVariance(KestrelError):
    """Paired differences have (numerically) zero variance."""


class SchemaError(KestrelError):
    """Trajectory file violates the documented schema."""

    def __init__(self, message, line=None):
        super().__init__(f"{message}" + (f" (line {line})" if line is not None else ""))
        self.line = line


class MappingError(KestrelError):
    """CSV ingestion column map does not fit the file."""


class NonMonotoneTime(KestrelError):
    """Timestamps decrease or repeat inside one trajectory."""


class TransportError(KestrelError):
    """LLM endpoint returned a non-success status."""

    def __init__(self, status, detail=""):
        super().__init__(f"endpoint returned status {status}" + (f": {detail}" if detail else ""))
        self.status = status


class ProviderTimeout(KestrelError):
    """LLM endpoint did not answer within the configured timeout."""


class NoValidCandidates(KestrelError):
    """Provider response contained no parseable, valid programs."""
