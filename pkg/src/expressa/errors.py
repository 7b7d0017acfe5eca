"""Exception hierarchy shared across the toolkit."""


class ExpressaError(Exception):
    """Base class for all toolkit errors."""


class ChannelCountError(ExpressaError):
    """Audio file has more than one channel."""


class FormatError(ExpressaError):
    """Audio file uses an unsupported container or codec."""


class CorruptFileError(ExpressaError):
    """Audio file is truncated or structurally broken."""


class SilentClipError(ExpressaError):
    """Clip contains no samples above the silence threshold."""


class LabelError(ExpressaError):
    """Manifest row carries an unknown emotion label."""


class DuplicateError(ExpressaError):
    """Manifest contains a repeated (performer, emotion) pair."""


class InputTooShortError(ExpressaError):
    """Signal shorter than one analysis frame."""


class ConfigError(ExpressaError):
    """Invalid configuration value or file."""


class DomainError(ExpressaError):
    """Argument outside the mathematically valid domain."""


class InsufficientOnsetsError(ExpressaError):
    """Too few onsets to estimate tempo."""


class FeatureUndefinedError(ExpressaError):
    """A feature track ended up empty for this recording."""


class SchemaError(ExpressaError):
    """Feature matrices or files with inconsistent column sets."""


class InsufficientDataError(ExpressaError):
    """Not enough rows/values for the requested statistic."""


class DegenerateGroupsError(ExpressaError):
    """Zero within-group variance makes the F statistic infinite."""


class MissingClassError(ExpressaError):
    """A class label is absent from the training rows."""


class SubsetError(ExpressaError):
    """A configured feature subset references an unavailable feature."""
