"""Exception types shared across the package.

Every error raised deliberately by this package derives from PairError so
callers (and the service layer, which converts failures into error envelopes)
can catch one base class.
"""

from __future__ import annotations


class PairError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(PairError):
    """A file or wire document does not match its declared format."""

    def __init__(self, message: str, *, path: str | None = None, field: str | None = None):
        detail = message
        if field:
            detail = f"{detail} (field: {field})"
        if path:
            detail = f"{detail} (file: {path})"
        super().__init__(detail)
        self.path = path
        self.field = field


class IntegrityError(PairError):
    """A graph document references nodes that do not exist."""


class ContractViolation(PairError):
    """A caller broke a documented precondition."""


class UnknownOwner(PairError):
    """The pool has no entry for the requested owner."""


class ConsentDenied(PairError):
    """The requester is not allowed to read the owner's graph."""


class QuerySyntaxError(PairError):
    """Query text failed to parse.

    Carries a 1-based line/column position and the set of token kinds that
    would have been accepted at that position.
    """

    def __init__(self, message: str, line: int, column: int, expected: set[str]):
        shown = ", ".join(sorted(expected))
        super().__init__(f"{message} at line {line} column {column} (expected one of: {shown})")
        self.line = line
        self.column = column
        self.expected = frozenset(expected)


class QuerySemanticError(PairError):
    """Query parsed but references an unbound variable."""

    def __init__(self, message: str, variable: str):
        super().__init__(message)
        self.variable = variable


class ReasoningError(PairError):
    """A reasoning step could not produce a result from its inputs."""


class AnchorResolutionError(ReasoningError):
    """No anchor satisfied the resolution formula.

    ``kind`` is "no_semantic_match" (carrying the best score seen) or
    "nothing_in_front" (carrying the semantically matching candidates).
    """

    def __init__(self, message: str, *, kind: str, best_score: float | None = None,
                 candidates: tuple[str, ...] = ()):
        super().__init__(message)
        self.kind = kind
        self.best_score = best_score
        self.candidates = candidates


class DegenerateTotalError(PairError):
    """Proportions were requested over amounts that sum to zero."""


class ProtocolError(PairError):
    """A scene event or service envelope violates the protocol."""
