"""Exception hierarchy shared by the pipeline modules.

Every error carries a stable ``code`` string (used by the CLI and the review
service when surfacing failures) and, where it makes sense, the timestamp of
the offending sample so operators can locate bad data in a stream.
"""

from __future__ import annotations


class TeleopError(Exception):
    """Base class for all pipeline errors."""

    code = "error"

    def __init__(self, message: str, timestamp: float | None = None):
        if timestamp is not None:
            message = f"{message} (at t={timestamp!r})"
        super().__init__(message)
        self.timestamp = timestamp


class InvalidInputError(TeleopError):
    """Non-finite or otherwise malformed input values."""

    code = "invalid-input"


class StreamOrderError(TeleopError):
    """Timestamps not strictly increasing within a stream."""

    code = "stream-order"


class UnwrapAmbiguityError(TeleopError):
    """Inter-sample Euler jump of pi or more; sign of the turn is ambiguous."""

    code = "unwrap-ambiguity"


class DegenerateOrientationError(TeleopError):
    """Pitch within the gimbal guard of +/-pi/2; yaw/roll are ill-defined."""

    code = "degenerate-orientation"


class ShapeError(TeleopError):
    """Joint-vector length or layout mismatch."""

    code = "shape"


class AlignmentError(TeleopError):
    """Streams share no overlap window; cannot be resampled to one clock."""

    code = "alignment"


class InvalidSpecError(TeleopError):
    """Trajectory or configuration spec fails validation."""

    code = "invalid-spec"


class ConfigError(TeleopError):
    """Config file cannot be parsed or is missing required fields."""

    code = "config"


class EpisodeFormatError(TeleopError):
    """Episode file unreadable: bad version, truncated, or malformed record."""

    code = "episode-format"


class InvariantViolationError(TeleopError):
    """Episode content violates a structural invariant; names the violation."""

    code = "invariant-violation"

    def __init__(self, violation: str, message: str, timestamp: float | None = None):
        super().__init__(f"{violation}: {message}", timestamp)
        self.violation = violation


class AnnotationEditError(TeleopError):
    """Base class for rejected review edits."""

    code = "edit"


class BoundaryOrderError(AnnotationEditError):
    """A moved boundary would cross or touch a neighboring boundary."""

    code = "boundary-order"


class EditRangeError(AnnotationEditError):
    """Edit target (index or split time) is outside the valid range."""

    code = "range"


class MinDurationError(AnnotationEditError):
    """Edit would create a subtask shorter than the configured minimum."""

    code = "min-duration"


class ImmutabilityError(AnnotationEditError):
    """Edit attempted on an approved (frozen) annotation set."""

    code = "immutability"


class StatusError(TeleopError):
    """Operation requires approved annotations but some are not."""

    code = "status"


class ContractViolationError(TeleopError):
    """A registered breakpoint proposer returned malformed proposals."""

    code = "contract-violation"
