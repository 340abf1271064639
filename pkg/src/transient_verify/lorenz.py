"""Lorenz vector field with pinned evaluation order, fixed points and destinies."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import DivergenceError, DomainError, EmptyTrajectoryError
from .errors import ArithmeticFault
from .fp_modes import MValue, PrecisionMode, m_mul, m_sub, mvalue

TRANSIENT_WINDOW = (13.926, 24.06)

# Settling defaults: ball radius in phase space and the hold time inside it.
EPS_SETTLE = 1.0
T_HOLD = 5.0


class TransientWindowWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    r: float = 20.0
    b: float = 8.0 / 3.0

    def __post_init__(self):
        for name in ("sigma", "r", "b"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v}")
        if self.sigma <= 0 or self.b <= 0:
            raise DomainError("sigma and b must be positive")
        if self.r <= 1:
            raise DomainError(f"r must exceed 1 for nontrivial fixed points, got {self.r}")

    @property
    def in_transient_window(self) -> bool:
        lo, hi = TRANSIENT_WINDOW
        return lo < self.r < hi

    def warn_if_outside_window(self) -> None:
        if not self.in_transient_window:
            warnings.warn(
                f"r={self.r} lies outside the transient-chaos window "
                f"{TRANSIENT_WINDOW[0]} < r < {TRANSIENT_WINDOW[1]}",
                TransientWindowWarning,
                stacklevel=2,
            )


Scalar = Union[float, MValue]


class State3(NamedTuple):
    x: Scalar
    y: Scalar
    z: Scalar

    def as_floats(self) -> "State3":
        return State3(float(self.x), float(self.y), float(self.z))

    def mirrored(self) -> "State3":
        """Image under the symmetry (x, y, z) -> (-x, -y, z)."""
        return State3(-self.x, -self.y, self.z)


class RhsVariant(enum.Enum):
    """Association order of the Lorenz right-hand side.

    YA: ydot = ((r*x) - (x*z)) - y
    YB: ydot = ((r*x) - y) - (x*z)
    YC: as YA, with xdot = (sigma*y) - (sigma*x)
    """

    YA = "ya"
    YB = "yb"
    YC = "yc"

    @property
    def code(self) -> int:
        return _VARIANT_CODE[self]

    @classmethod
    def parse(cls, text: Union[str, "RhsVariant"]) -> "RhsVariant":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown variant {text!r}; expected one of "
                + ", ".join(v.value for v in cls)
            ) from None

    def __str__(self) -> str:
        return self.value


_VARIANT_CODE = {RhsVariant.YA: 0, RhsVariant.YB: 1, RhsVariant.YC: 2}


class Destiny(enum.Enum):
    C_PLUS = "CPlus"
    C_MINUS = "CMinus"
    UNDECIDED = "Undecided"

    def mirrored(self) -> "Destiny":
        if self is Destiny.C_PLUS:
            return Destiny.C_MINUS
        if self is Destiny.C_MINUS:
            return Destiny.C_PLUS
        return self

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class FixedPoints:
    c_plus: State3
    c_minus: State3
    origin: State3


def fixed_points(p: LorenzParams) -> FixedPoints:
    if p.r <= 1:
        raise DomainError(f"r must exceed 1, got {p.r}")
    a = math.sqrt(p.b * (p.r - 1.0))
    z = p.r - 1.0
    return FixedPoints(
        c_plus=State3(a, a, z),
        c_minus=State3(-a, -a, z),
        origin=State3(0.0, 0.0, 0.0),
    )


def lorenz_rhs(
    p: LorenzParams,
    s: State3,
    variant: RhsVariant = RhsVariant.YA,
    mode: PrecisionMode = PrecisionMode.P64,
) -> State3:
    """Evaluate (xdot, ydot, zdot) with every operation rounded in ``mode``.

    Components of the result are :class:`MValue`. Parameters are brought into
    ``mode`` first, so under P32 ``b = 8/3`` is its binary32 neighbour.
    """
    variant = RhsVariant(variant)
    try:
        x, y, z = (mvalue(mode, c) for c in s)
        sigma, r, b = (mvalue(mode, c) for c in (p.sigma, p.r, p.b))
        if variant is RhsVariant.YC:
            dx = m_sub(mode, m_mul(mode, sigma, y), m_mul(mode, sigma, x))
        else:
            dx = m_mul(mode, sigma, m_sub(mode, y, x))
        rx = m_mul(mode, r, x)
        xz = m_mul(mode, x, z)
        if variant is RhsVariant.YB:
            dy = m_sub(mode, m_sub(mode, rx, y), xz)
        else:
            dy = m_sub(mode, m_sub(mode, rx, xz), y)
        dz = m_sub(mode, m_mul(mode, x, y), m_mul(mode, b, z))
    except ArithmeticFault as exc:
        raise DivergenceError(f"vector field evaluation failed: {exc}", step=-1) from exc
    return State3(dx, dy, dz)


def classify_destiny(
    traj,
    fps: FixedPoints,
    eps_settle: float = EPS_SETTLE,
    t_hold: float = T_HOLD,
) -> tuple[Destiny, float]:
    """Which fixed point the sampled trajectory settles on, and when.

    A fixed point is the destiny when, from some sample time ``t*`` on, every
    sample stays strictly inside its ``eps_settle`` ball and the samples cover
    at least ``t_hold`` after ``t*``. ``t*`` is the earliest such time.
    Returns ``(Destiny.UNDECIDED, inf)`` otherwise.
    """
    if eps_settle <= 0 or t_hold <= 0:
        raise ValueError("eps_settle and t_hold must be positive")
    times = np.asarray(traj.times, dtype=float)
    states = np.asarray(traj.states, dtype=float)
    if times.size == 0:
        raise EmptyTrajectoryError("trajectory has no samples")
    # sample times are i*dt products; forgive their last-bit noise
    tol = 1e-9 * max(1.0, abs(t_hold))
    best = (Destiny.UNDECIDED, math.inf)
    for tag, centre in ((Destiny.C_PLUS, fps.c_plus), (Destiny.C_MINUS, fps.c_minus)):
        d = np.sqrt(np.sum((states - np.asarray(centre, dtype=float)) ** 2, axis=1))
        outside = np.flatnonzero(~(d < eps_settle))
        first = 0 if outside.size == 0 else int(outside[-1]) + 1
        if first >= times.size:
            continue
        t_star = float(times[first])
        if times[-1] - t_star >= t_hold - tol and t_star < best[1]:
            best = (tag, t_star)
    return best
