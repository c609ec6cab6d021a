"""Exception types raised by the panogaze library.

Every error that callers are expected to catch derives from
:class:`PanogazeError`, so CLI code can convert any library failure into a
nonzero exit with a readable message.
"""


class PanogazeError(Exception):
    """Base class for all library errors."""


class NonUnitVectorError(PanogazeError):
    """A direction vector deviates from unit norm beyond tolerance."""


class SequenceTooShortError(PanogazeError):
    """A gaze sequence has too few samples for the requested operation."""


class ParseError(PanogazeError):
    """A data file is malformed; the message names the file and row."""


class MissingColumnError(ParseError):
    """A CSV file lacks one of the required columns."""


class NonIntegerDecimationError(PanogazeError):
    """Native sample rate is not an integer multiple of the target rate."""


class TooShortError(PanogazeError):
    """A sequence is shorter than the requested truncation length."""


class WrongImageCountError(PanogazeError):
    """The number of images does not match the configured dataset."""


class InvalidRangeError(PanogazeError):
    """A numeric configuration value is outside its valid range."""


class StepOutOfRangeError(PanogazeError):
    """A diffusion step index is outside 1..T."""


class ModelNotLoadedError(PanogazeError):
    """Sampling was requested before model parameters were loaded."""


class DataEmptyError(PanogazeError):
    """An operation received an empty dataset or sequence list."""


class ShapeMismatchError(PanogazeError):
    """Tensor or image dimensions do not match the expected shape."""


class DegenerateMeanError(PanogazeError):
    """The vector mean of a point set is too close to zero to normalize."""


class EmptySequenceError(PanogazeError):
    """A metric received an empty sequence."""


class LengthMismatchError(PanogazeError):
    """Two sequences must have equal length but do not."""


class EmptyScanpathError(PanogazeError):
    """A scanpath-level metric received a scanpath with no fixations."""


class TooFewSequencesError(PanogazeError):
    """The human baseline needs at least two ground-truth sequences."""


class ResolutionMismatchError(PanogazeError):
    """Two maps or images must share a resolution but do not."""


class NoFixationsError(PanogazeError):
    """A fixation-based metric received no fixation locations."""


class ZeroMapError(PanogazeError):
    """A map with zero total mass cannot be normalized."""
