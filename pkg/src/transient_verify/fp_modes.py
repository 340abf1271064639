"""Per-operation precision control.

Three rungs are available:

* ``P32``: every elementary operation is rounded to IEEE-754 binary32
  (round-to-nearest, ties-to-even) immediately after it is performed;
* ``P64``: native binary64;
* ``PDD``: double-double, an unevaluated sum ``hi + lo`` of two binary64
  values carrying roughly 31 significant decimal digits.

Values travel as :class:`MValue`. Non-finite results are raised, never
returned.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

from . import _dd
from .errors import NaNFault, OverflowFault

__all__ = [
    "PrecisionMode",
    "MValue",
    "FLT_MAX",
    "round_p32",
    "unit_roundoff",
    "mvalue",
    "m_add",
    "m_sub",
    "m_mul",
    "m_div",
    "m_neg",
]

FLT_MAX = 3.4028234663852886e38


class PrecisionMode(enum.Enum):
    P32 = "p32"
    P64 = "p64"
    PDD = "pdd"

    @property
    def unit_roundoff(self) -> float:
        return _UNIT_ROUNDOFF[self]

    @property
    def decimal_digits(self) -> int:
        return _DECIMAL_DIGITS[self]

    @property
    def rank(self) -> int:
        return _RANK[self]

    @classmethod
    def parse(cls, text: Union[str, "PrecisionMode"]) -> "PrecisionMode":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown precision {text!r}; expected one of "
                + ", ".join(m.value for m in cls)
            ) from None

    def __str__(self) -> str:
        return self.value


_UNIT_ROUNDOFF = {
    PrecisionMode.P32: 2.0**-24,
    PrecisionMode.P64: 2.0**-53,
    PrecisionMode.PDD: 2.0**-104,
}
_DECIMAL_DIGITS = {PrecisionMode.P32: 7, PrecisionMode.P64: 15, PrecisionMode.PDD: 31}
_RANK = {PrecisionMode.P32: 0, PrecisionMode.P64: 1, PrecisionMode.PDD: 2}


def unit_roundoff(mode: PrecisionMode) -> float:
    return mode.unit_roundoff


def _check_finite(x: float) -> float:
    if math.isnan(x):
        raise NaNFault("NaN produced")
    if math.isinf(x):
        raise OverflowFault(f"overflow: {x}")
    return x


def round_p32(x: float) -> float:
    """Nearest binary32 value to the binary64 ``x``, re-widened to binary64.

    Rounds to nearest with ties to even and keeps subnormals. Raises
    :class:`OverflowFault` when the rounded magnitude exceeds the binary32
    range and :class:`NaNFault` for NaN input.
    """
    x = float(x)
    _check_finite(x)
    if x == 0.0:
        return x
    _, e = math.frexp(x)
    # 24-bit significand; the quantum bottoms out at the smallest subnormal
    q = max(e - 24, -149)
    n = round(math.ldexp(x, -q))  # exact scaling, round() is half-to-even
    # copysign keeps the sign of values that underflow to zero
    y = math.copysign(math.ldexp(float(n), q), x)
    if abs(y) > FLT_MAX:
        raise OverflowFault(f"{x!r} overflows binary32")
    return y


@dataclass(frozen=True)
class MValue:
    """A number held in some precision mode; ``lo`` is nonzero only for PDD."""

    hi: float
    lo: float = 0.0

    def __float__(self) -> float:
        return self.hi + self.lo

    def __neg__(self) -> "MValue":
        return MValue(-self.hi, -self.lo)


Number = Union[MValue, float, int]


def mvalue(mode: PrecisionMode, x: Number) -> MValue:
    """Bring ``x`` into ``mode`` (binary32 inputs are rounded on entry)."""
    if isinstance(x, MValue):
        if mode is PrecisionMode.P32:
            if x.lo != 0.0 or round_p32(x.hi) != x.hi:
                return MValue(round_p32(float(x)))
        elif mode is PrecisionMode.P64 and x.lo != 0.0:
            return MValue(_check_finite(x.hi + x.lo))
        return x
    x = _check_finite(float(x))
    if mode is PrecisionMode.P32:
        return MValue(round_p32(x))
    return MValue(x)


def _dd_result(hi: float, lo: float) -> MValue:
    # finite operands only yield NaN here through inf - inf after an overflow
    if not (math.isfinite(hi) and math.isfinite(lo)):
        raise OverflowFault("double-double overflow")
    return MValue(hi, lo)


def _binary(mode: PrecisionMode, a: Number, b: Number, op: str) -> MValue:
    a = mvalue(mode, a)
    b = mvalue(mode, b)
    if mode is PrecisionMode.PDD:
        fn = _DD_OPS[op]
        return _dd_result(*fn(a.hi, a.lo, b.hi, b.lo))
    x, y = a.hi, b.hi
    if op == "add":
        r = x + y
    elif op == "sub":
        r = x - y
    elif op == "mul":
        r = x * y
    else:
        if y == 0.0:
            raise OverflowFault("division by zero")
        r = x / y
    _check_finite(r)
    if mode is PrecisionMode.P32:
        # binary64 carries more than 2*24+2 bits, so rounding the binary64
        # result equals rounding the exact result
        r = round_p32(r)
    return MValue(r)


_DD_OPS = {
    "add": _dd.dd_add,
    "sub": _dd.dd_sub,
    "mul": _dd.dd_mul,
    "div": _dd.dd_div,
}


def m_add(mode: PrecisionMode, a: Number, b: Number) -> MValue:
    return _binary(mode, a, b, "add")


def m_sub(mode: PrecisionMode, a: Number, b: Number) -> MValue:
    return _binary(mode, a, b, "sub")


def m_mul(mode: PrecisionMode, a: Number, b: Number) -> MValue:
    return _binary(mode, a, b, "mul")


def m_div(mode: PrecisionMode, a: Number, b: Number) -> MValue:
    b = mvalue(mode, b)
    if b.hi == 0.0:
        raise OverflowFault("division by zero")
    return _binary(mode, a, b, "div")


def m_neg(mode: PrecisionMode, a: Number) -> MValue:
    return -mvalue(mode, a)
