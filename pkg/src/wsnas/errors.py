"""Exception types shared across the package."""


class WsnasError(Exception):
    """Base class for all package errors."""


class MalformedIdError(WsnasError, ValueError):
    """A child-model code string does not name a valid child."""


class DomainError(WsnasError, ValueError):
    """An argument is outside the operation's stated domain."""


class ContractError(WsnasError, RuntimeError):
    """A caller violated an API contract (foreign key, missing grads, ...)."""


class ShapeError(WsnasError, ValueError):
    """Tensor shapes do not match what a layer expects."""


class NumericFault(WsnasError, FloatingPointError):
    """A non-finite value appeared where the engine requires finite data."""


class FormatError(WsnasError, ValueError):
    """A file does not conform to its declared format.

    ``offset`` holds the byte offset of the first offending record when the
    source is a binary file, else None.
    """

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset
