"""Exception types shared across the simulator."""


class RmbocError(Exception):
    """Base class for all rmboc errors."""


class InvalidParameter(RmbocError):
    """A structural parameter (n, N, k, w, j) is out of range."""


class InvalidAddress(RmbocError):
    """An address does not exist in the topology, or a degenerate pair was given."""


class NoFreeSegment(RmbocError):
    """Every segment slot on a link is already bound."""


class NotConnected(RmbocError):
    """Data injection attempted without an active circuit for the pair."""


class ConfigError(RmbocError):
    """A run configuration value is invalid."""


class ParseError(RmbocError):
    """A scenario line could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class AddressError(ParseError):
    """A scenario line names an address outside the topology."""
