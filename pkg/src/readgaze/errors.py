"""Exception types shared across the package."""


class ReadgazeError(Exception):
    """Base class for all package errors."""


class DegenerateRect(ReadgazeError):
    """Viewport rectangle has non-positive width or height."""


class NoViewport(ReadgazeError):
    """A valid gaze sample precedes every viewport rect event."""


class EmptyLayout(ReadgazeError):
    """Document layout has no words where words are required."""


class LayoutTooSmall(ReadgazeError):
    """Document layout has too few words for the requested archetype."""


class ZeroDuration(ReadgazeError):
    """Segment duration is zero."""


class NoDirectionalSaccades(ReadgazeError):
    """No saccade carries a non-neutral direction class."""


class BadWindowSize(ReadgazeError):
    """Time-window size outside the supported range."""


class SingleClass(ReadgazeError):
    """Training data contains fewer than two classes."""


class EmptyValidation(ReadgazeError):
    """No validation examples available for early stopping."""


class ShapeMismatch(ReadgazeError):
    """Input tensor shape does not match the model configuration."""


class TooFewFixations(ReadgazeError):
    """Not enough fixations to render a window."""


class EmptySample(ReadgazeError):
    """Statistical test received an empty sample."""


class ZeroVariance(ReadgazeError):
    """Pooled variance is zero."""


class SingularCovariance(ReadgazeError):
    """Pooled covariance matrix is singular or ill-conditioned."""


class LengthMismatch(ReadgazeError):
    """Paired sequences differ in length."""


class DegenerateMarginals(ReadgazeError):
    """Chance agreement is 1 and the sequences differ."""


class DomainError(ReadgazeError):
    """Special-function argument outside its domain."""


class TooFewParticipants(ReadgazeError):
    """Cross-validation needs at least two participants."""


class LeakageError(ReadgazeError):
    """Test-participant data reached a training fold."""


class EmptyMatrix(ReadgazeError):
    """Confusion matrix is empty."""


class StoreError(ReadgazeError):
    """Session store violation (overlap, missing id, bad schema)."""


class UnknownId(StoreError):
    """Session, segment, or model id not found."""


class SegmentOverlap(StoreError):
    """Segment would overlap an existing segment."""


class ProtocolViolation(StoreError):
    """Annotation-protocol violation (finalizing early, editing final)."""


class RoleViolation(StoreError):
    """Request lacks the reviewer role it needs or reads a withheld field."""


class MalformedUpload(StoreError):
    """Uploaded session files cannot be parsed or fail validation."""


class SchemaMismatch(StoreError):
    """Stored file carries an unsupported schema version."""


class FaultInjected(ReadgazeError):
    """Raised by test hooks that simulate a crash mid-write."""


class CorruptCheckpoint(ReadgazeError):
    """Checkpoint file has a bad magic, version, or tensor table."""
