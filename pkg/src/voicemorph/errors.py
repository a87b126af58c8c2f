"""Exception types shared across the package."""


class VoicemorphError(Exception):
    """Base class for all package-specific errors."""


class MissingFileError(VoicemorphError, FileNotFoundError):
    pass


class UnsupportedEncodingError(VoicemorphError, ValueError):
    """WAV file is not mono linear PCM in a supported bit depth."""


class EmptyAudioError(VoicemorphError, ValueError):
    pass


class SampleRateMismatchError(VoicemorphError, ValueError):
    pass


class IoFailureError(VoicemorphError, OSError):
    pass


class ParseError(VoicemorphError, ValueError):
    pass


class DuplicateKeyError(VoicemorphError, ValueError):
    pass


class ConfigError(VoicemorphError, ValueError):
    pass


class DimensionMismatchError(VoicemorphError, ValueError):
    pass


class ZeroVectorError(VoicemorphError, ValueError):
    pass


class TooShortError(VoicemorphError, ValueError):
    pass


class EmptyScoresError(VoicemorphError, ValueError):
    pass


class MissingThresholdError(VoicemorphError, ValueError):
    pass


class IncompletePairError(VoicemorphError, ValueError):
    pass


class EmptyTableError(VoicemorphError, ValueError):
    pass


class InsufficientDataError(VoicemorphError, ValueError):
    pass
