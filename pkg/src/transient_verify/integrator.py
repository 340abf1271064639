"""Fixed-step RK4 under a precision mode.

Two routes compute the same thing:

* :func:`rk4_step` is the readable reference, written with the ``m_*``
  operations one scalar at a time;
* :func:`integrate` runs compiled loops for whole trajectories.

Both use the same association order, so they agree bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import ArithmeticFault, DivergenceError
from .fp_modes import PrecisionMode, m_add, m_div, m_mul, mvalue, round_p32
from .lorenz import (
    EPS_SETTLE,
    T_HOLD,
    FixedPoints,
    LorenzParams,
    RhsVariant,
    State3,
    fixed_points,
    lorenz_rhs,
)

MAX_STEPS = 10**9

VectorField = Callable[[State3, PrecisionMode], State3]


@dataclass(frozen=True)
class IntegrationSpec:
    dt: float = 1e-3
    t_max: float = 60.0
    record_stride: int = 100
    stop_on_settle: bool = False
    eps_settle: float = EPS_SETTLE
    t_hold: float = T_HOLD

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not self.t_max >= self.dt:
            raise ValueError(f"t_max ({self.t_max}) must be at least dt ({self.dt})")
        if self.t_max / self.dt > MAX_STEPS:
            raise ValueError(f"t_max/dt exceeds the {MAX_STEPS} step guard")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be an integer >= 1, got {self.record_stride}")
        if self.eps_settle <= 0 or self.t_hold <= 0:
            raise ValueError("eps_settle and t_hold must be positive")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_max / self.dt)))

    @property
    def hold_steps(self) -> int:
        return int(math.ceil(self.t_hold / self.dt - 1e-9))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 3), binary64 images of the mode values
    mode: PrecisionMode
    variant: RhsVariant
    params: LorenzParams
    spec: IntegrationSpec
    magnitude_scale: float = math.nan
    diverged: bool = False
    steps: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> State3:
        return State3(*(float(v) for v in self.states[-1]))


def _mode_constants(mode: PrecisionMode, dt: float):
    dt_m = mvalue(mode, dt)
    half = m_div(mode, dt_m, 2.0)
    sixth = m_div(mode, dt_m, 6.0)
    return dt_m, half, sixth


def rk4_step(
    p: LorenzParams,
    s: State3,
    dt: float,
    variant: RhsVariant = RhsVariant.YA,
    mode: PrecisionMode = PrecisionMode.P64,
    rhs: Optional[VectorField] = None,
) -> State3:
    """One classic RK4 step with every scalar operation done in ``mode``.

    The update is ``s + (dt/6)*(((k1 + 2*k2) + 2*k3) + k4)`` with ``dt/2`` and
    ``dt/6`` rounded in ``mode``. ``rhs(state, mode)`` replaces the Lorenz
    field when given. Returns a :class:`State3` of :class:`MValue`.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if rhs is None:
        def rhs(state, m):
            return lorenz_rhs(p, state, variant, m)

    try:
        dt_m, half, sixth = _mode_constants(mode, dt)
        s = State3(*(mvalue(mode, c) for c in s))

        def shifted(h, k):
            return State3(*(m_add(mode, si, m_mul(mode, h, ki)) for si, ki in zip(s, k)))

        k1 = rhs(s, mode)
        k2 = rhs(shifted(half, k1), mode)
        k3 = rhs(shifted(half, k2), mode)
        k4 = rhs(shifted(dt_m, k3), mode)
        out = []
        for si, a, b_, c, d in zip(s, k1, k2, k3, k4):
            acc = m_add(mode, a, m_mul(mode, 2.0, b_))
            acc = m_add(mode, acc, m_mul(mode, 2.0, c))
            acc = m_add(mode, acc, d)
            out.append(m_add(mode, si, m_mul(mode, sixth, acc)))
    except ArithmeticFault as exc:
        raise DivergenceError(f"RK4 step failed: {exc}", step=1) from exc
    except DivergenceError as exc:
        raise DivergenceError(str(exc), step=1) from exc
    return State3(*out)


def integrate(
    p: LorenzParams,
    ic: State3,
    spec: IntegrationSpec = IntegrationSpec(),
    variant: RhsVariant = RhsVariant.YA,
    mode: PrecisionMode = PrecisionMode.P64,
    fps: Optional[FixedPoints] = None,
) -> Trajectory:
    """Integrate from ``ic`` and record every ``spec.record_stride``-th step.

    The initial and last computed states are always recorded. With
    ``spec.stop_on_settle`` the run halts once the state has stayed inside a
    settling ball for ``spec.t_hold``. Raises :class:`DivergenceError` with
    the partial trajectory attached if a state stops being finite.
    """
    variant = RhsVariant(variant)
    fps = fps if fps is not None else fixed_points(p)
    cp = np.asarray(fps.c_plus, dtype=np.float64)
    n_steps = spec.n_steps
    stride = int(spec.record_stride)
    hold = spec.hold_steps
    try:
        if mode is PrecisionMode.PDD:
            pr = tuple(v for c in (p.sigma, p.r, p.b) for v in (float(c), 0.0))
            s0 = np.array([v for c in ic for v in (float(c), 0.0)], dtype=np.float64)
            steps, states, _, status, fail_step, scale = _kernels.integrate_dd(
                pr, s0, float(spec.dt), n_steps, stride, spec.stop_on_settle,
                cp, float(spec.eps_settle), hold, variant.code,
            )
        else:
            ftype = np.float32 if mode is PrecisionMode.P32 else np.float64
            dt_m, half, sixth = _mode_constants(mode, spec.dt)
            conv = round_p32 if mode is PrecisionMode.P32 else float
            args = [ftype(conv(c)) for c in (p.sigma, p.r, p.b, *ic)]
            steps, states, status, fail_step, scale = _kernels.integrate_native(
                *args,
                ftype(half.hi), ftype(dt_m.hi), ftype(sixth.hi), ftype(2.0),
                variant.code, n_steps, stride, spec.stop_on_settle,
                cp, float(spec.eps_settle), hold,
            )
    except ArithmeticFault as exc:
        raise DivergenceError(f"initial data not representable: {exc}", step=0) from exc
    traj = Trajectory(
        times=steps.astype(np.float64) * spec.dt,
        states=states,
        mode=mode,
        variant=variant,
        params=p,
        spec=spec,
        magnitude_scale=float(scale),
        diverged=status != _kernels.OK,
        steps=steps,
    )
    if status != _kernels.OK:
        raise DivergenceError(
            f"trajectory diverged at step {fail_step} (t={fail_step * spec.dt:g})",
            step=int(fail_step),
            partial=traj,
        )
    return traj


def trajectory_to_csv(traj: Trajectory) -> str:
    """Serialize as ``t,x,y,z`` rows using shortest round-trip decimals."""
    buf = io.StringIO()
    buf.write("t,x,y,z\n")
    for t, (x, y, z) in zip(traj.times.tolist(), traj.states.tolist()):
        buf.write(f"{t!r},{x!r},{y!r},{z!r}\n")
    return buf.getvalue()


class CSVFormatError(ValueError):
    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


def read_trajectory_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse ``t,x,y,z`` CSV text into ``(times, states)`` arrays.

    Raises :class:`CSVFormatError` naming the first malformed row
    (row 1 is the header).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CSVFormatError("empty CSV", row=1) from None
    if [h.strip() for h in header] != ["t", "x", "y", "z"]:
        raise CSVFormatError(f"bad header {header!r}, expected t,x,y,z", row=1)
    times, states = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise CSVFormatError(f"row {lineno}: expected 4 fields, got {len(row)}", row=lineno)
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise CSVFormatError(f"row {lineno}: non-numeric value in {row!r}", row=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise CSVFormatError(f"row {lineno}: non-finite value", row=lineno)
        times.append(vals[0])
        states.append(vals[1:])
    if not times:
        raise CSVFormatError("CSV has no data rows", row=2)
    return np.array(times), np.array(states, dtype=np.float64).reshape(-1, 3)
