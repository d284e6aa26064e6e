"""Exception types shared across the toolkit."""


class ShiftlabError(Exception):
    """Base class for toolkit errors."""


class FormatError(ShiftlabError):
    """A file does not conform to one of the binary/bundle formats."""


class BadMagicError(FormatError):
    """File starts with the wrong magic bytes."""


class VersionMismatchError(FormatError):
    """File carries an unsupported format version."""


class TruncatedPayloadError(FormatError):
    """File ends before the declared payload is complete."""


class TrainingCollapseError(ShiftlabError):
    """A training run diverged (non-finite loss or collapsed domain loss)."""
