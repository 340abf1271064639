"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations

from typing import Any


class TransientVerifyError(Exception):
    """Base class for all errors raised by this package."""


class ArithmeticFault(TransientVerifyError, ArithmeticError):
    """A mode-controlled arithmetic operation produced a non-finite value."""


class OverflowFault(ArithmeticFault, OverflowError):
    pass


class NaNFault(ArithmeticFault):
    pass


class DomainError(TransientVerifyError, ValueError):
    pass


class DivergenceError(TransientVerifyError):
    """Integration blew up. ``partial`` holds the trajectory computed so far."""

    def __init__(self, message: str, step: int, partial: Any = None):
        super().__init__(message)
        self.step = step
        self.partial = partial


class EmptyTrajectoryError(TransientVerifyError, ValueError):
    pass


class UnsettledError(TransientVerifyError):
    pass


class SegmentTooShortError(TransientVerifyError, ValueError):
    pass


class CollapseError(TransientVerifyError):
    pass


class TooFewSamplesError(TransientVerifyError, ValueError):
    pass
