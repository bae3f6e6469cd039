"""Exception types shared across the package."""


class LossforgeError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(LossforgeError, ValueError):
    """Inputs that must agree in shape (or channel count) do not."""


class MissingFrame(LossforgeError, ValueError):
    """A frame directory has a gap in its index sequence."""


class EmptySequence(LossforgeError, ValueError):
    """A sequence has fewer than the three frames a triplet needs."""


class IndivisibleSize(LossforgeError, ValueError):
    """A spatial size is not divisible by the required factor."""


class PatchTooLarge(LossforgeError, ValueError):
    """Requested crop does not fit inside the source frames."""


class MissingNeighbor(LossforgeError, ValueError):
    """Relation term requested for a time offset with no frame supplied."""


class NonpositiveDelta(LossforgeError, ValueError):
    """Huber threshold must be > 0."""


class LengthMismatch(LossforgeError, ValueError):
    """Two sequences that must pair frame-for-frame have different lengths."""


class RowOutOfRange(LossforgeError, ValueError):
    """Temporal-profile row index outside the frame height."""


class FrameTooSmall(LossforgeError, ValueError):
    """Frame smaller than the optical-flow window."""


class ScenePairMissing(LossforgeError, ValueError):
    """Evaluation could not pair a ground-truth scene with an output scene."""


class DataExhausted(LossforgeError, RuntimeError):
    """A finite data stream ended before the schedule did."""


class VersionMismatch(LossforgeError, RuntimeError):
    """Checkpoint was written with an incompatible format version."""


class CorruptCheckpoint(LossforgeError, RuntimeError):
    """Checkpoint file could not be decoded."""


class ConfigError(LossforgeError, ValueError):
    """Run configuration is malformed or inconsistent."""
