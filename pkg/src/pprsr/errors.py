"""Exception types shared across the package.

The CLI maps these onto its exit codes: :class:`ParseError` -> 1,
:class:`InvariantError` -> 2.
"""


class ParseError(ValueError):
    """Malformed input document. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvariantError(ValueError):
    """A value violates a type invariant (stochasticity, distribution mass, ...)."""
