"""Exception types shared across the package."""

from __future__ import annotations


class ClrError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ClrError):
    """Malformed instance file."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ValidationError(ClrError):
    """Instance data violates a structural requirement."""


class MetricViolation(ClrError):
    """A cost matrix fails the triangle inequality beyond tolerance."""

    def __init__(self, i: int, j: int, l: int, slack: float):
        super().__init__(
            f"triangle inequality violated: w({i},{l}) > w({i},{j}) + w({j},{l}) "
            f"by {slack:.3e}"
        )
        self.i = i
        self.j = j
        self.l = l
        self.slack = slack


class TooLarge(ClrError):
    """Input exceeds the size cap of an exhaustive solver."""


class NonIntegerDemand(ClrError):
    """The exact solver requires integer demands."""


class OddVertexCount(ClrError):
    """Perfect matching requested on an odd number of vertices."""


class Disconnected(ClrError):
    """Tour closing requires a connected subgraph."""


class InfeasibleUnsplittable(ClrError):
    """Some demand exceeds the vehicle capacity in unsplittable mode."""


class UnsplittableUnsupported(ClrError):
    """Path splitting serves splittable demand only."""


class NonpositivePbks(ClrError):
    """Gap computation needs a positive reference value."""


class InvariantViolation(ClrError):
    """A guaranteed per-run inequality failed at runtime."""
