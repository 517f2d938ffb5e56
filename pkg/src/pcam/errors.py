"""Exception hierarchy shared across the package."""


class PcamError(Exception):
    """Base class for all package-specific errors."""


class InvalidArchitectureError(PcamError):
    """Layer widths do not describe a usable network."""


class DimensionError(PcamError):
    """An array argument does not match the model's layer shapes."""


class InvalidInputError(PcamError):
    """An argument violates an operation's contract."""


class FormatError(PcamError):
    """A binary file is malformed; carries the offending byte offset."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class VocabularyError(PcamError):
    """A word is missing from the vocabulary."""


class ConfigError(PcamError):
    """An experiment configuration is invalid; names the bad field."""
