"""Exception hierarchy shared by every module."""


class InfoTeacherError(Exception):
    """Base class for all package errors."""


class ConfigurationError(InfoTeacherError, ValueError):
    """Invalid parameters, unknown registry entries, malformed config files."""


class IngestionError(InfoTeacherError, ValueError):
    """A data file is missing or cannot be parsed."""


class SizeError(ConfigurationError):
    """Requested sample counts exceed what the data provides."""


class DimensionError(ConfigurationError):
    """Array shapes or requested dimensions are inconsistent."""


class EvaluationError(InfoTeacherError, RuntimeError):
    """A predictor produced a non-finite value."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class TrainingError(InfoTeacherError, RuntimeError):
    """Training diverged (non-finite loss)."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
