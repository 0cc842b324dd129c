"""Exception types shared across the package.

Class names double as stable error codes: the CLI prints them on its
machine-readable error line and tests assert on them directly.
"""


class RioError(Exception):
    """Base class for all errors raised by this package."""


class InvalidConfig(RioError):
    """A configuration value or combination of values is not allowed."""


class ShapeMismatch(RioError):
    """An array has the wrong shape for the operation; message names the node."""


class NonScalarLoss(RioError):
    """backward() was asked to differentiate something that is not a scalar."""


class NonFiniteLoss(RioError):
    """A training loss evaluated to NaN or infinity."""


class ZeroVector(RioError):
    """A direction-dependent quantity was requested for a (near-)zero vector."""


class DegenerateInput(RioError):
    """Point sets too small or too collapsed for alignment to be determined."""


class TooShort(RioError):
    """A sequence or trajectory does not span the required length."""


class MissingGroundTruth(RioError):
    """Ground-truth positions are required but absent from the sequence."""


class LengthMismatch(RioError):
    """Two trajectories that must have equal length do not."""


class ZeroLengthGroundTruth(RioError):
    """The ground-truth path has zero length, so drift is undefined."""


class CorruptCheckpoint(RioError):
    """Checkpoint manifest and payload disagree; message names the tensor."""


class VersionMismatch(RioError):
    """Checkpoint was written with an unsupported format version."""


class InvalidSpec(RioError):
    """A scenario or shift specification violates its invariants."""


class InvalidOnset(RioError):
    """A shift onset lies outside the sequence duration."""
