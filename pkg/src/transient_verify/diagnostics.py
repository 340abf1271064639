"""Chaotic duration, largest Lyapunov exponent and attractor extent."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import (
    CollapseError,
    DivergenceError,
    SegmentTooShortError,
    TooFewSamplesError,
    UnsettledError,
)
from .fp_modes import PrecisionMode
from .integrator import Trajectory, VectorField, _mode_constants, rk4_step
from .lorenz import (
    EPS_SETTLE,
    T_HOLD,
    Destiny,
    FixedPoints,
    LorenzParams,
    RhsVariant,
    State3,
    classify_destiny,
)

D0 = 1e-9
RENORM_INTERVAL = 0.5
# Fraction of the segment end beyond which renormalizations are discarded:
# the final approach to the fixed point contracts and would bias the rate low.
SETTLING_CUTOFF = 0.9
MIN_RENORMS = 10
MIN_EXTENT_SAMPLES = 50


@dataclass(frozen=True)
class ChaoticSegment:
    t_start: float
    t_end: float

    @property
    def delta_t(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class LyapunovEstimate:
    lam: float
    stderr: float
    n_renorms: int
    renorm_interval: float
    d0: float


@dataclass(frozen=True)
class AttractorExtent:
    per_axis_range: tuple[float, float, float]
    diagonal: float


def escape_time(traj: Trajectory, until: float) -> float:
    """Time of the last lobe switch (sign change of x) at or before ``until``.

    Chaotic wandering on the saddle is lobe switching; once the sign of x
    stops changing the orbit is spiralling into its fixed point, which at
    r = 20 takes another 10-20 time units of pure contraction.
    """
    times = np.asarray(traj.times, dtype=float)
    x = np.asarray(traj.states, dtype=float)[:, 0]
    keep = times <= until
    sx = np.sign(x[keep])
    switches = np.flatnonzero(sx[1:] * sx[:-1] < 0)
    if switches.size == 0:
        return 0.0
    return float(times[switches[-1] + 1])


def chaotic_segment(
    traj: Trajectory,
    fps: FixedPoints,
    eps_settle: float = EPS_SETTLE,
    t_hold: float = T_HOLD,
    allow_unsettled: bool = False,
    end: str = "escape",
) -> ChaoticSegment:
    """Span of chaotic wandering, from release (t = 0).

    ``end="escape"`` (default) stops at the last lobe switch before settling;
    ``end="settle"`` stops at the settle time from
    :func:`~transient_verify.lorenz.classify_destiny`, which also counts the
    final spiral into the settling ball. An unsettled trajectory spans its
    whole horizon when ``allow_unsettled`` is set.
    """
    if end not in ("escape", "settle"):
        raise ValueError(f"end must be 'escape' or 'settle', got {end!r}")
    destiny, settle_time = classify_destiny(traj, fps, eps_settle, t_hold)
    if destiny is Destiny.UNDECIDED:
        if not allow_unsettled:
            raise UnsettledError(
                f"trajectory did not settle within t={traj.t_end:g}"
            )
        return ChaoticSegment(0.0, traj.t_end)
    if end == "settle":
        return ChaoticSegment(0.0, settle_time)
    return ChaoticSegment(0.0, escape_time(traj, settle_time))


def _unit_direction(seed: Optional[int]) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def largest_lyapunov(
    p: LorenzParams,
    ic: State3,
    segment: ChaoticSegment,
    dt: float = 1e-3,
    d0: float = D0,
    renorm_interval: float = RENORM_INTERVAL,
    variant: RhsVariant = RhsVariant.YA,
    seed: Optional[int] = 0,
    rhs: Optional[VectorField] = None,
) -> LyapunovEstimate:
    """Benettin two-trajectory estimate of the largest Lyapunov exponent.

    Always computed in binary64. A companion trajectory starts ``d0`` away
    along a random unit direction (seeded) and is pulled back to distance
    ``d0`` every ``renorm_interval``. Only intervals whose midpoint lies in
    ``[t_start, 0.9 * t_end]`` contribute. ``rhs`` swaps in another vector
    field (pure-Python path, for testing).
    """
    if not d0 > 0:
        raise CollapseError(f"initial separation must be positive, got {d0}")
    if not renorm_interval > 0:
        raise ValueError("renorm_interval must be positive")
    if segment.delta_t < 20 * renorm_interval:
        raise SegmentTooShortError(
            f"segment of {segment.delta_t:g} time units is shorter than "
            f"20 renormalization intervals ({20 * renorm_interval:g})"
        )
    steps_per = int(round(renorm_interval / dt))
    if steps_per < 1 or not math.isclose(steps_per * dt, renorm_interval, rel_tol=1e-9):
        raise ValueError("renorm_interval must be a whole number of steps")
    cutoff = SETTLING_CUTOFF * segment.t_end
    n_total = int(math.floor(cutoff / renorm_interval + 0.5))
    mids = (np.arange(n_total) + 0.5) * renorm_interval
    use = (mids >= segment.t_start) & (mids <= cutoff)

    ref = np.array([float(c) for c in ic])
    pert = ref + d0 * _unit_direction(seed)
    if rhs is None:
        dt_m, half, sixth = _mode_constants(PrecisionMode.P64, dt)
        logs, status = _kernels.benettin_native(
            float(p.sigma), float(p.r), float(p.b), *ref, *pert,
            half.hi, dt_m.hi, sixth.hi, 2.0, RhsVariant(variant).code,
            steps_per, n_total, float(d0),
        )
    else:
        logs, status = _benettin_python(ref, pert, dt, rhs, steps_per, n_total, d0)
    if status == _kernels.COLLAPSED:
        raise CollapseError("separation collapsed to zero")
    if status == _kernels.DIVERGED:
        raise DivergenceError("Lyapunov trajectories diverged", step=-1)
    rates = logs[use[: len(logs)]] / renorm_interval
    n = int(rates.size)
    if n < MIN_RENORMS:
        raise SegmentTooShortError(f"only {n} usable renormalizations (need {MIN_RENORMS})")
    lam = float(np.sum(rates) / n)
    stderr = float(np.std(rates, ddof=1) / math.sqrt(n))
    return LyapunovEstimate(lam, stderr, n, renorm_interval, d0)


def _benettin_python(ref, pert, dt, rhs, steps_per, n_total, d0):
    mode = PrecisionMode.P64
    logs = np.empty(n_total)
    ref = State3(*ref)
    pert = State3(*pert)
    for i in range(n_total):
        for _ in range(steps_per):
            ref = rk4_step(None, ref, dt, mode=mode, rhs=rhs).as_floats()
            pert = rk4_step(None, pert, dt, mode=mode, rhs=rhs).as_floats()
        sep = np.subtract(pert, ref)
        d = float(np.linalg.norm(sep))
        if not d > 0:
            return logs[:i], _kernels.COLLAPSED
        logs[i] = math.log(d / d0)
        pert = State3(*(np.asarray(ref) + sep * (d0 / d)))
    return logs, _kernels.OK


@dataclass(frozen=True)
class EnsembleLyapunov:
    lam: float
    members: tuple[LyapunovEstimate, ...]

    @property
    def spread(self) -> float:
        lams = [m.lam for m in self.members]
        return float(np.std(lams, ddof=1)) if len(lams) > 1 else 0.0


def ensemble_lyapunov(estimates: Sequence[LyapunovEstimate]) -> EnsembleLyapunov:
    if not estimates:
        raise ValueError("empty ensemble")
    # fixed reduction order keeps the mean deterministic
    return EnsembleLyapunov(float(np.mean([e.lam for e in estimates])), tuple(estimates))


def attractor_extent(
    traj: Trajectory,
    segment: ChaoticSegment,
    min_samples: int = MIN_EXTENT_SAMPLES,
) -> AttractorExtent:
    """Bounding box of the samples whose time lies inside ``segment``."""
    times = np.asarray(traj.times, dtype=float)
    states = np.asarray(traj.states, dtype=float)
    sel = (times >= segment.t_start) & (times <= segment.t_end)
    if int(sel.sum()) < max(1, min_samples):
        raise TooFewSamplesError(
            f"{int(sel.sum())} samples inside the segment, need {min_samples}"
        )
    ranges = np.ptp(states[sel], axis=0)
    return AttractorExtent(
        per_axis_range=tuple(float(v) for v in ranges),
        diagonal=float(math.sqrt(float(np.sum(ranges**2)))),
    )
