"""Exception types raised across the tracking engine."""


class ReidTrackError(Exception):
    """Base class for all engine errors."""


class DimensionMismatchError(ReidTrackError):
    """Feature vectors of different dimensions were combined."""


class ZeroVectorError(ReidTrackError):
    """Cosine distance requested for a zero-norm vector."""


class EmptyDictionaryError(ReidTrackError):
    """Representative requested from a dictionary with no entries."""


class MissingFeatureError(ReidTrackError):
    """A candidate reached association without an attached feature."""


class NoOverlapError(ReidTrackError):
    """A box lies entirely outside the frame it was clipped against."""


class DecodeError(ReidTrackError):
    """Anchor decoding produced a non-finite box."""


class WrongPayloadError(ReidTrackError):
    """A frame payload variant does not match what the consumer needs."""


class MalformedRecordError(ReidTrackError):
    """A candidate interchange line could not be parsed.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class RegionSmallerThanTemplateError(ReidTrackError):
    """The search region crop cannot contain the matching template."""


class PatchTooSmallError(ReidTrackError):
    """A patch is below the minimum size an embedder can handle."""


class InfeasibleConfigError(ReidTrackError):
    """A scenario configuration cannot be realized."""


class InitFailedError(ReidTrackError):
    """Tracker initialization failed on the first frame."""


class StepFailedError(ReidTrackError):
    """A tracker step failed; the pre-call state is unchanged.

    Carries the index of the frame being processed.
    """

    def __init__(self, frame_index: int, message: str):
        super().__init__(f"frame {frame_index}: {message}")
        self.frame_index = frame_index


class NoAnnotatedFramesError(ReidTrackError):
    """A sequence has no annotated frames to score."""


class EmptyInputError(ReidTrackError):
    """An aggregate was requested over zero sequences."""


class ConfigError(ReidTrackError):
    """A run configuration failed to parse or validate."""
