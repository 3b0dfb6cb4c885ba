"""Exception hierarchy shared across the package."""


class SeqmcError(Exception):
    """Base class for all package errors."""


class EmptySequence(SeqmcError, ValueError):
    pass


class TokenOutOfRange(SeqmcError, ValueError):
    def __init__(self, position: int, token: int):
        super().__init__(f"token {token} at position {position} is out of range")
        self.position = position
        self.token = token


class PositionOutOfRange(SeqmcError, IndexError):
    pass


class PositionNotMasked(SeqmcError, ValueError):
    pass


class ScorerFailure(SeqmcError, RuntimeError):
    """A scorer (local or remote) could not produce logits."""


class StateSpaceTooLarge(SeqmcError, ValueError):
    pass


class NonPositiveTemperature(SeqmcError, ValueError):
    pass


class InvalidBoundary(SeqmcError, ValueError):
    pass


class NoConvergence(SeqmcError, RuntimeError):
    pass


class LengthMismatch(SeqmcError, ValueError):
    pass


class ShapeMismatch(SeqmcError, ValueError):
    pass


class InvalidTable(SeqmcError, ValueError):
    pass


class ConfigInvalid(SeqmcError, ValueError):
    pass


class IoFailure(SeqmcError, OSError):
    pass


class ConnectFailure(SeqmcError, ConnectionError):
    pass


class VersionMismatch(SeqmcError, RuntimeError):
    pass


class MalformedResponse(SeqmcError, RuntimeError):
    pass
