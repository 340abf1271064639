"""Escalating-precision validity test.

For each precision rung in turn: integrate every right-hand-side variant,
classify destinies, measure the chaotic duration, attractor extent and
magnitude scale, assemble the error budget, and stop as soon as a rung both
passes the budget test and has all variants agreeing on a settled destiny.
Agreement of equivalent formulas is only a necessary condition for
correctness, never a sufficient one; reports say so.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diagnostics import (
    D0,
    MIN_EXTENT_SAMPLES,
    RENORM_INTERVAL,
    AttractorExtent,
    ChaoticSegment,
    EnsembleLyapunov,
    attractor_extent,
    chaotic_segment,
    ensemble_lyapunov,
    largest_lyapunov,
)
from .error_budget import MARGIN_ETA, ErrorBudget, Verdict, assemble_budget
from .errors import TransientVerifyError
from .fp_modes import PrecisionMode
from .integrator import IntegrationSpec, Trajectory, integrate
from .lorenz import (
    EPS_SETTLE,
    T_HOLD,
    Destiny,
    FixedPoints,
    LorenzParams,
    RhsVariant,
    State3,
    classify_destiny,
    fixed_points,
)

log = logging.getLogger(__name__)

REFERENCE_IC = State3(2.0, 1.0, 5.42857)
# Box from which transient initial conditions are drawn: x, y in [-10, 10], z in [0, 30].
IC_BOX_LOW = (-10.0, -10.0, 0.0)
IC_BOX_HIGH = (10.0, 10.0, 30.0)
THREADS_ENV = "TRANSIENT_VERIFY_THREADS"

NOT_SUFFICIENT_NOTE = (
    "variant agreement is a necessary condition only; it does not establish "
    "that the computed destiny is correct"
)


class Conclusion(enum.Enum):
    VALIDATED = "Validated"
    NECESSARY_CONDITION_FAILED = "NecessaryConditionFailed"
    LADDER_EXHAUSTED = "LadderExhausted"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class LyapunovSettings:
    d0: float = D0
    renorm_interval: float = RENORM_INTERVAL
    ensemble_size: int = 10
    seed: int = 0
    min_duration: float = 30.0
    max_attempts: int = 20000


@dataclass(frozen=True)
class PipelineConfig:
    params: LorenzParams = LorenzParams()
    ic: State3 = REFERENCE_IC
    dt: float = 1e-3
    t_max: float = 100.0
    eps_settle: float = EPS_SETTLE
    t_hold: float = T_HOLD
    margin_eta: float = MARGIN_ETA
    ladder: tuple[PrecisionMode, ...] = (PrecisionMode.P32, PrecisionMode.P64, PrecisionMode.PDD)
    variants: tuple[RhsVariant, ...] = (RhsVariant.YA, RhsVariant.YB)
    lyapunov: LyapunovSettings = LyapunovSettings()
    record_stride: int = 100
    accumulate: str = "none"
    segment_end: str = "escape"

    def __post_init__(self):
        object.__setattr__(self, "ic", State3(*(float(c) for c in self.ic)))
        object.__setattr__(self, "ladder", tuple(PrecisionMode.parse(m) for m in self.ladder))
        object.__setattr__(self, "variants", tuple(RhsVariant.parse(v) for v in self.variants))
        if not self.ladder:
            raise ValueError("ladder must not be empty")
        ranks = [m.rank for m in self.ladder]
        if any(b <= a for a, b in zip(ranks, ranks[1:])):
            raise ValueError("ladder must be strictly increasing in precision")
        if len(self.variants) < 2:
            raise ValueError("at least two variants are needed for the agreement check")
        if len(set(self.variants)) != len(self.variants):
            raise ValueError("variants must be distinct")
        if not all(math.isfinite(c) for c in self.ic):
            raise ValueError("ic must be finite")
        if not self.margin_eta > 0:
            raise ValueError("margin_eta must be positive")
        # validates dt, t_max, stride, eps_settle, t_hold
        self.integration_spec()

    def integration_spec(self, t_max: Optional[float] = None) -> IntegrationSpec:
        return IntegrationSpec(
            dt=self.dt,
            t_max=self.t_max if t_max is None else t_max,
            record_stride=self.record_stride,
            stop_on_settle=True,
            eps_settle=self.eps_settle,
            t_hold=self.t_hold,
        )

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "ic": list(self.ic),
            "dt": self.dt,
            "t_max": self.t_max,
            "eps_settle": self.eps_settle,
            "t_hold": self.t_hold,
            "margin_eta": self.margin_eta,
            "ladder": [str(m) for m in self.ladder],
            "variants": [str(v) for v in self.variants],
            "lyapunov": asdict(self.lyapunov),
            "record_stride": self.record_stride,
            "accumulate": self.accumulate,
            "segment_end": self.segment_end,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(data)
        if "params" in kw:
            kw["params"] = LorenzParams(**kw["params"])
        if "ic" in kw:
            kw["ic"] = State3(*kw["ic"])
        if "lyapunov" in kw:
            kw["lyapunov"] = LyapunovSettings(**kw["lyapunov"])
        for key in ("ladder", "variants"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


@dataclass
class VariantOutcome:
    variant: RhsVariant
    destiny: Destiny
    settle_time: float
    trajectory: Optional[Trajectory] = field(default=None, repr=False)
    error: Optional[str] = None


@dataclass
class RungResult:
    mode: PrecisionMode
    variants: list[VariantOutcome]
    budget: Optional[ErrorBudget]
    variants_agree: bool
    segment: Optional[ChaoticSegment] = None
    extent: Optional[AttractorExtent] = None
    magnitude_scale: float = math.nan


@dataclass
class ValidityReport:
    per_rung: list[RungResult]
    final_rung: Optional[PrecisionMode]
    conclusion: Conclusion
    lyapunov: Optional[EnsembleLyapunov] = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "conclusion": str(self.conclusion),
            "final_rung": None if self.final_rung is None else str(self.final_rung),
            "per_rung": [
                {
                    "mode": str(r.mode),
                    "budget": None if r.budget is None else _json_safe(r.budget.to_dict()),
                    "variants": [
                        {
                            "variant": str(v.variant),
                            "destiny": str(v.destiny),
                            "settle_time": _finite_or_none(v.settle_time),
                        }
                        for v in r.variants
                    ],
                    "variants_agree": r.variants_agree,
                }
                for r in self.per_rung
            ],
        }


def _finite_or_none(x: float) -> Optional[float]:
    return float(x) if math.isfinite(x) else None


def _json_safe(d: dict) -> dict:
    return {k: _finite_or_none(v) if isinstance(v, float) else v for k, v in d.items()}


def variant_agreement(destinies: Sequence[Destiny]) -> bool:
    """True iff every destiny is the same settled fixed point."""
    if len(destinies) < 2:
        raise ValueError("need at least two destinies to compare")
    first = destinies[0]
    return first is not Destiny.UNDECIDED and all(d is first for d in destinies)


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _pmap(fn, items):
    items = list(items)
    n = min(_thread_count(), len(items))
    if n <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _run_variant(
    p: LorenzParams,
    ic: State3,
    spec: IntegrationSpec,
    variant: RhsVariant,
    mode: PrecisionMode,
    fps: FixedPoints,
) -> VariantOutcome:
    try:
        traj = integrate(p, ic, spec, variant, mode, fps)
    except TransientVerifyError as exc:
        return VariantOutcome(variant, Destiny.UNDECIDED, math.inf, getattr(exc, "partial", None), str(exc))
    destiny, settle = classify_destiny(traj, fps, spec.eps_settle, spec.t_hold)
    return VariantOutcome(variant, destiny, settle, traj)


def _segment_of(outcome: VariantOutcome, fps: FixedPoints, cfg: PipelineConfig) -> Optional[ChaoticSegment]:
    if outcome.trajectory is None or outcome.destiny is Destiny.UNDECIDED:
        return None
    return chaotic_segment(
        outcome.trajectory, fps, cfg.eps_settle, cfg.t_hold, end=cfg.segment_end
    )


def transient_lifetime(
    p: LorenzParams,
    ic: State3,
    spec: IntegrationSpec,
    fps: Optional[FixedPoints] = None,
    variant: RhsVariant = RhsVariant.YA,
    segment_end: str = "escape",
) -> float:
    """Chaotic duration of the binary64 run from ``ic``; ``inf`` if unsettled."""
    fps = fps or fixed_points(p)
    try:
        traj = integrate(p, ic, spec, variant, PrecisionMode.P64, fps)
    except TransientVerifyError:
        return math.inf
    destiny, _ = classify_destiny(traj, fps, spec.eps_settle, spec.t_hold)
    if destiny is Destiny.UNDECIDED:
        return math.inf
    return chaotic_segment(traj, fps, spec.eps_settle, spec.t_hold, end=segment_end).delta_t


def sample_transient_ics(
    p: LorenzParams,
    n: int,
    seed: int,
    min_lifetime: float = 20.0,
    spec: Optional[IntegrationSpec] = None,
    max_attempts: int = 100_000,
    segment_end: str = "escape",
) -> list[State3]:
    """Draw ICs uniformly from the box until ``n`` have a binary64 chaotic
    duration above ``min_lifetime`` (and settle within the horizon)."""
    spec = spec or IntegrationSpec(t_max=300.0, stop_on_settle=True)
    fps = fixed_points(p)
    rng = np.random.default_rng(seed)
    found: list[State3] = []
    attempts = 0
    while len(found) < n and attempts < max_attempts:
        attempts += 1
        ic = State3(*(float(v) for v in rng.uniform(IC_BOX_LOW, IC_BOX_HIGH)))
        life = transient_lifetime(p, ic, spec, fps, segment_end=segment_end)
        if min_lifetime < life < math.inf:
            found.append(ic)
    if len(found) < n:
        log.warning("found only %d of %d transient ICs in %d attempts", len(found), n, attempts)
    return found


@dataclass
class LyapunovEnsembleResult:
    ensemble: EnsembleLyapunov
    ics: list[State3]
    reference_extent: Optional[AttractorExtent]


def lyapunov_ensemble(cfg: PipelineConfig, include_ic: bool = True) -> LyapunovEnsembleResult:
    """Binary64 λ averaged over long transients: the configured IC when its
    own transient is long enough, topped up with seeded box samples."""
    p = cfg.params
    fps = fixed_points(p)
    st = cfg.lyapunov
    spec = cfg.integration_spec(t_max=max(cfg.t_max, 300.0))
    rng = np.random.default_rng(st.seed)
    members: list[tuple[State3, ChaoticSegment, Trajectory]] = []

    def consider(ic: State3) -> None:
        out = _run_variant(p, ic, spec, cfg.variants[0], PrecisionMode.P64, fps)
        seg = _segment_of(out, fps, cfg)
        if seg is not None and seg.delta_t >= st.min_duration:
            members.append((ic, seg, out.trajectory))

    if include_ic:
        consider(cfg.ic)
    attempts = 0
    while len(members) < st.ensemble_size and attempts < st.max_attempts:
        attempts += 1
        consider(State3(*(float(v) for v in rng.uniform(IC_BOX_LOW, IC_BOX_HIGH))))
    if not members:
        raise TransientVerifyError(
            f"no transient with chaotic duration >= {st.min_duration} found "
            f"in {attempts} attempts"
        )

    def estimate(item):
        k, (ic, seg, _) = item
        return largest_lyapunov(
            p, ic, seg, cfg.dt, st.d0, st.renorm_interval, cfg.variants[0], seed=st.seed + k
        )

    estimates = _pmap(estimate, enumerate(members))
    longest = max(members, key=lambda m: m[1].delta_t)
    extent = attractor_extent(longest[2], longest[1], min_samples=MIN_EXTENT_SAMPLES)
    return LyapunovEnsembleResult(ensemble_lyapunov(estimates), [m[0] for m in members], extent)


def run_validity_test(cfg: PipelineConfig) -> ValidityReport:
    """Walk the precision ladder until a rung validates or the ladder ends."""
    p = cfg.params
    p.warn_if_outside_window()
    fps = fixed_points(p)
    spec = cfg.integration_spec()
    notes: list[str] = []

    try:
        lyap = lyapunov_ensemble(cfg)
    except TransientVerifyError as exc:
        notes.append(f"Lyapunov ensemble failed: {exc}")
        lyap = None
    lam = lyap.ensemble.lam if lyap else None

    # binary64 shadow of the audited IC: the best available estimate of the
    # true chaotic duration, used when a rung's own runs cannot provide one
    shadow = _run_variant(p, cfg.ic, spec, cfg.variants[0], PrecisionMode.P64, fps)
    shadow_seg = _segment_of(shadow, fps, cfg)
    if shadow_seg is None:
        notes.append("binary64 shadow run did not settle within t_max")

    per_rung: list[RungResult] = []
    conclusion = Conclusion.LADDER_EXHAUSTED
    final_rung: Optional[PrecisionMode] = None
    first_disagreeing_pass: Optional[PrecisionMode] = None

    for mode in cfg.ladder:
        outcomes = _pmap(
            lambda v: _run_variant(p, cfg.ic, spec, v, mode, fps), cfg.variants
        )
        for o in outcomes:
            if o.error:
                notes.append(f"{mode}/{o.variant}: {o.error}")
        agree = variant_agreement([o.destiny for o in outcomes])

        segments = [s for s in (_segment_of(o, fps, cfg) for o in outcomes) if s is not None]
        candidates = segments + ([shadow_seg] if shadow_seg is not None else [])
        if candidates:
            segment = max(candidates, key=lambda s: s.delta_t)
        else:
            segment = ChaoticSegment(0.0, cfg.t_max)
            notes.append(f"{mode}: no run settled; chaotic duration taken as t_max")

        extent = None
        for o, seg in ((outcomes[0], _segment_of(outcomes[0], fps, cfg)), (shadow, shadow_seg)):
            if o.trajectory is not None and seg is not None:
                try:
                    extent = attractor_extent(o.trajectory, seg)
                    break
                except TransientVerifyError:
                    continue
        if extent is None and lyap is not None:
            extent = lyap.reference_extent

        scales = [o.trajectory.magnitude_scale for o in outcomes if o.trajectory is not None]
        scale = max(scales) if scales else math.nan

        budget = None
        if lam is not None and extent is not None and scale > 0:
            budget = assemble_budget(
                mode, cfg.dt, scale, lam, segment.delta_t, extent.diagonal,
                cfg.margin_eta, cfg.accumulate,
            )
        else:
            notes.append(f"{mode}: error budget unavailable")
        per_rung.append(RungResult(mode, outcomes, budget, agree, segment, extent, scale))

        passed = budget is not None and budget.verdict is Verdict.PASS
        if passed and agree:
            conclusion = Conclusion.VALIDATED
            final_rung = mode
            notes.append(NOT_SUFFICIENT_NOTE)
            break
        if passed and first_disagreeing_pass is None:
            first_disagreeing_pass = mode

    if conclusion is not Conclusion.VALIDATED and first_disagreeing_pass is not None:
        conclusion = Conclusion.NECESSARY_CONDITION_FAILED
        final_rung = first_disagreeing_pass
    return ValidityReport(per_rung, final_rung, conclusion, lyap.ensemble if lyap else None, notes)


@dataclass
class SweepRow:
    ic: State3
    variant: RhsVariant
    mode: PrecisionMode
    destiny: Destiny
    settle_time: float


@dataclass
class SweepResult:
    mode: PrecisionMode
    n_total: int
    n_disagree: int
    rows: list[SweepRow]

    @property
    def fraction(self) -> float:
        return self.n_disagree / self.n_total if self.n_total else 0.0

    def summary(self) -> dict:
        return {
            "mode": str(self.mode),
            "n_total": self.n_total,
            "n_disagree": self.n_disagree,
            "fraction": self.fraction,
        }


def disagreement_sweep(
    cfg: PipelineConfig,
    ic_set: Sequence[State3],
    mode: PrecisionMode,
) -> SweepResult:
    """Run every variant from every IC at ``mode`` and count ICs whose
    destinies differ or include an unsettled run. Errors count as unsettled."""
    if not ic_set:
        raise ValueError("ic_set must not be empty")
    p = cfg.params
    fps = fixed_points(p)
    spec = cfg.integration_spec()
    jobs = [(ic, v) for ic in ic_set for v in cfg.variants]
    outs = _pmap(lambda job: _run_variant(p, job[0], spec, job[1], mode, fps), jobs)
    rows = [
        SweepRow(State3(*(float(c) for c in ic)), o.variant, mode, o.destiny, o.settle_time)
        for (ic, _), o in zip(jobs, outs)
    ]
    k = len(cfg.variants)
    n_disagree = sum(
        not variant_agreement([o.destiny for o in outs[i : i + k]])
        for i in range(0, len(outs), k)
    )
    return SweepResult(mode, len(ic_set), n_disagree, rows)
