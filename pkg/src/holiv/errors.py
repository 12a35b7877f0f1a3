"""Exception types raised across the package."""

from __future__ import annotations


class HolivError(Exception):
    """Base class for every typed failure raised by holiv."""


class SingularInput(HolivError):
    pass


class ZeroMatrix(HolivError):
    pass


class IllConditioned(HolivError):
    pass


class SpanNotSaturated(HolivError):
    pass


class NotIrreducible(HolivError):
    pass


class DimensionMismatch(HolivError):
    pass


class DegenerateZ(HolivError):
    pass


class MissingWord(HolivError):
    pass


class NotHyperbolic(HolivError):
    pass


class TooFar(HolivError):
    pass


class JumpTooLarge(HolivError):
    pass


class BudgetExceeded(HolivError):
    pass


class NotOnStableLeaf(HolivError):
    pass


class NotOnUnstableLeaf(HolivError):
    pass


class TolUnreachable(HolivError):
    pass


class RankMismatch(HolivError):
    pass


class EmptyOrbitList(HolivError):
    pass


class InsufficientPowers(HolivError):
    pass


class EmptyChart(HolivError):
    pass


class CoverGap(HolivError):
    pass


class NearSingularNode(HolivError):
    pass


class DegenerateBasis(HolivError):
    pass


class StageError(HolivError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
