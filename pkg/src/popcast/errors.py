"""Exception types shared across the package."""


class PopcastError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PopcastError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ContractError(PopcastError):
    """An argument violates a documented precondition."""


class EmptyLogError(PopcastError):
    """An operation that requires events received none."""


class NoCandidatesError(PopcastError):
    """No item has received a link on or before the requested cut day."""
