"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the domain an operation is defined on."""


class SupportError(ValueError):
    """A probability needed in a log or ratio is zero (strict mode only).

    Carries ``state_index``, the flat index of the offending state.
    """

    def __init__(self, message: str, state_index: int):
        super().__init__(message)
        self.state_index = state_index


class UndefinedRowError(ValueError):
    """A conditional row with zero parent mass was consumed.

    Carries ``parent_index``, the flat index of the offending parent
    configuration.
    """

    def __init__(self, message: str, parent_index: int):
        super().__init__(message)
        self.parent_index = parent_index


class UnsupportedKindError(TypeError):
    """An operation was called on a model family that does not support it."""


class IdxFormatError(ValueError):
    """An IDX byte stream is malformed. Carries the byte ``offset``."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset
