"""Exception types shared across the package.

The CLI maps these onto its exit codes: parse errors exit 1, resource
guards exit 2, failed hypotheses exit 3.
"""

from __future__ import annotations


class ParseError(ValueError):
    """Malformed input text.  ``line`` and ``pos`` are 1-based when known."""

    def __init__(self, message: str, *, line: int | None = None, pos: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if pos is not None:
            where.append(f"position {pos}")
        full = f"{message} ({', '.join(where)})" if where else message
        super().__init__(full)
        self.line = line
        self.pos = pos


class ResourceLimitError(RuntimeError):
    """An exact computation would exceed its configured work budget."""


class HypothesisError(ValueError):
    """An input violates the precondition of a construction."""
