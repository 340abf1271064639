"""Local error estimates, Lyapunov amplification and the reliability verdict."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .fp_modes import PrecisionMode, unit_roundoff

MARGIN_ETA = 0.01
RK4_LOCAL_ORDER = 5


class Dominant(enum.Enum):
    ROUNDOFF = "Roundoff"
    TRUNCATION = "Truncation"

    def __str__(self) -> str:
        return self.value


class Verdict(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"

    def __str__(self) -> str:
        return self.value


def roundoff_delta0(mode: PrecisionMode, magnitude_scale: float) -> float:
    """Round-off of one operation on numbers of size ``magnitude_scale``."""
    if not magnitude_scale > 0:
        raise ValueError("magnitude_scale must be positive")
    return unit_roundoff(mode) * magnitude_scale


def truncation_delta0(dt: float, local_order: int = RK4_LOCAL_ORDER) -> float:
    """Local truncation error ``dt**local_order`` of one step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return dt**local_order


def final_error(delta0: float, lam: float, delta_t: float) -> float:
    """``delta0 * exp(lam * delta_t)``; saturates to ``inf`` instead of raising."""
    if not delta0 > 0:
        raise ValueError("delta0 must be positive")
    if delta_t < 0:
        raise ValueError("delta_t must be non-negative")
    try:
        return delta0 * math.exp(lam * delta_t)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class ErrorBudget:
    mode: PrecisionMode
    delta0_roundoff: float
    delta0_truncation: float
    lam: float
    delta_t: float
    attractor_diagonal: float
    margin_eta: float = MARGIN_ETA
    n_steps_factor: float = 1.0

    @property
    def delta0(self) -> float:
        return max(self.delta0_roundoff, self.delta0_truncation) * self.n_steps_factor

    @property
    def dominant(self) -> Dominant:
        if self.delta0_roundoff >= self.delta0_truncation:
            return Dominant.ROUNDOFF
        return Dominant.TRUNCATION

    @property
    def delta_final(self) -> float:
        return final_error(self.delta0, self.lam, self.delta_t)

    @property
    def threshold(self) -> float:
        return self.margin_eta * self.attractor_diagonal

    @property
    def delta_final_saturated(self) -> bool:
        return math.isinf(self.delta_final)

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.delta_final <= self.threshold else Verdict.FAIL

    def to_dict(self) -> dict:
        return {
            "delta0_roundoff": self.delta0_roundoff,
            "delta0_truncation": self.delta0_truncation,
            "dominant": str(self.dominant),
            "lambda": self.lam,
            "delta_t": self.delta_t,
            "delta_final": self.delta_final,
            "attractor_diagonal": self.attractor_diagonal,
            "margin_eta": self.margin_eta,
            "verdict": str(self.verdict),
        }


def assemble_budget(
    mode: PrecisionMode,
    dt: float,
    magnitude_scale: float,
    lam,
    delta_t,
    attractor_diagonal,
    margin_eta: float = MARGIN_ETA,
    accumulate: str = "none",
) -> ErrorBudget:
    """Collect the diagnostics into an :class:`ErrorBudget`.

    ``lam``, ``delta_t`` and ``attractor_diagonal`` may be plain numbers or
    the diagnostic objects carrying them (a Lyapunov estimate, a chaotic
    segment, an attractor extent).

    ``accumulate`` optionally multiplies the local error by the number of
    steps over the chaotic span (``"linear"``) or its square root
    (``"sqrt"``), a stricter reading than the default single-step error.
    """
    lam = float(getattr(lam, "lam", lam))
    delta_t = float(getattr(delta_t, "delta_t", delta_t))
    attractor_diagonal = float(getattr(attractor_diagonal, "diagonal", attractor_diagonal))
    if not margin_eta > 0:
        raise ValueError("margin_eta must be positive")
    if attractor_diagonal < 0:
        raise ValueError("attractor_diagonal must be non-negative")
    n = max(1.0, delta_t / dt)
    factor = {"none": 1.0, "sqrt": math.sqrt(n), "linear": n}
    if accumulate not in factor:
        raise ValueError(f"accumulate must be one of {sorted(factor)}")
    return ErrorBudget(
        mode=mode,
        delta0_roundoff=roundoff_delta0(mode, magnitude_scale),
        delta0_truncation=truncation_delta0(dt),
        lam=lam,
        delta_t=delta_t,
        attractor_diagonal=attractor_diagonal,
        margin_eta=margin_eta,
        n_steps_factor=factor[accumulate],
    )
