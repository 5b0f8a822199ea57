"""Exception taxonomy shared across the package."""


class DeskvoiceError(Exception):
    """Base class for all errors raised by deskvoice."""


class ShapeError(DeskvoiceError):
    """Tensor or vector dimensions do not match an operation's contract."""


class ConfigError(DeskvoiceError):
    """A configuration value is missing, malformed, or inconsistent."""


class ContractError(DeskvoiceError):
    """An operation was called outside its stated preconditions."""


class DataError(DeskvoiceError):
    """Input data (tokens, corpus entries, checkpoints) is invalid."""


class CapacityError(DeskvoiceError):
    """A sequence exceeds the configured maximum length."""


class FormatError(DeskvoiceError):
    """A serialized artifact (WAV, checkpoint, config) cannot be parsed.

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
