import math
import warnings
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from transient_verify.errors import DomainError, EmptyTrajectoryError
from transient_verify.fp_modes import PrecisionMode
from transient_verify.lorenz import (
    Destiny,
    LorenzParams,
    RhsVariant,
    State3,
    TransientWindowWarning,
    classify_destiny,
    fixed_points,
    lorenz_rhs,
)

P32, P64, PDD = PrecisionMode.P32, PrecisionMode.P64, PrecisionMode.PDD
YA, YB, YC = RhsVariant.YA, RhsVariant.YB, RhsVariant.YC


def exact_rhs(p, s):
    sigma, r, b = (Fraction(v) for v in (p.sigma, p.r, p.b))
    x, y, z = (Fraction(v) for v in s)
    return (sigma * (y - x), r * x - x * z - y, x * y - b * z)


def floats(s):
    return tuple(float(c) for c in s)


# -- params ----------------------------------------------------------------------


def test_params_validation():
    with pytest.raises(DomainError):
        LorenzParams(sigma=0.0)
    with pytest.raises(DomainError):
        LorenzParams(b=-1.0)
    with pytest.raises(DomainError):
        LorenzParams(r=1.0)
    with pytest.raises(DomainError):
        LorenzParams(r=math.nan)


def test_window_warning():
    with pytest.warns(TransientWindowWarning):
        LorenzParams(r=28.0).warn_if_outside_window()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        LorenzParams(r=20.0).warn_if_outside_window()


def test_variant_parse():
    assert RhsVariant.parse("YB") is YB
    with pytest.raises(ValueError):
        RhsVariant.parse("yd")


# -- vector field ----------------------------------------------------------------


def test_rhs_vanishes_at_c_plus(params_r20, fps_r20):
    for v in (YA, YB, YC):
        out = floats(lorenz_rhs(params_r20, fps_r20.c_plus, v, P64))
        assert all(abs(c) < 1e-12 for c in out)


def test_rhs_reference_state(params_r20, reference_ic):
    out = floats(lorenz_rhs(params_r20, reference_ic, YA, P64))
    assert out[0] == -10.0
    assert out[1] == pytest.approx(28.14286, abs=1e-9)
    assert out[2] == pytest.approx(-12.47619, abs=1e-5)
    oracle = exact_rhs(params_r20, reference_ic)
    for got, want in zip(out, oracle):
        assert abs(Fraction(got) - want) <= abs(want) * Fraction(1, 2**50)


def test_rhs_mirrored_state(params_r20):
    out = floats(lorenz_rhs(params_r20, State3(-2.0, -1.0, 5.42857), YA, P64))
    assert out[0] == 10.0
    assert out[1] == pytest.approx(-28.14286, abs=1e-9)
    assert out[2] == pytest.approx(-12.47619, abs=1e-5)


def test_variants_agree_in_double_double():
    rng = np.random.default_rng(1)
    for _ in range(300):
        p = LorenzParams(*rng.uniform([1, 1.5, 0.5], [30, 30, 30]))
        s = State3(*rng.uniform(-40, 40, 3))
        a = lorenz_rhs(p, s, YA, PDD)
        b = lorenz_rhs(p, s, YB, PDD)
        ex = exact_rhs(p, s)[1]
        fa = Fraction(a.y.hi) + Fraction(a.y.lo)
        fb = Fraction(b.y.hi) + Fraction(b.y.lo)
        scale = max(abs(ex), Fraction(1, 10**6))
        assert abs(fa - fb) / scale <= Fraction(1, 2**100)


def test_p32_variants_can_differ(params_r20):
    rng = np.random.default_rng(4)
    differ = 0
    for _ in range(500):
        s = State3(*rng.uniform(-20, 20, 3))
        a = lorenz_rhs(params_r20, s, YA, P32).y
        b = lorenz_rhs(params_r20, s, YB, P32).y
        differ += a != b
    assert differ > 0


@pytest.mark.parametrize("mode", [P32, P64, PDD])
@pytest.mark.parametrize("variant", [YA, YB, YC])
def test_symmetry_is_bit_exact(mode, variant, params_r20):
    rng = np.random.default_rng([mode.rank, variant.code])
    for _ in range(300):
        s = State3(*rng.uniform(-30, 30, 3))
        f = lorenz_rhs(params_r20, s, variant, mode)
        g = lorenz_rhs(params_r20, s.mirrored(), variant, mode)
        assert g == State3(-f.x, -f.y, f.z)


def test_overflow_becomes_divergence(params_r20):
    from transient_verify.errors import DivergenceError

    with pytest.raises(DivergenceError):
        lorenz_rhs(params_r20, State3(1e30, 1e30, 1e30), YA, P32)


# -- fixed points ----------------------------------------------------------------


def test_fixed_points_examples(params_r20):
    fps = fixed_points(params_r20)
    assert fps.c_plus.x == pytest.approx(7.11805, abs=1e-5)
    assert fps.c_plus == (fps.c_plus.x, fps.c_plus.x, 19.0)
    assert fps.c_minus == (-fps.c_plus.x, -fps.c_plus.x, 19.0)
    assert fps.origin == (0.0, 0.0, 0.0)
    assert fixed_points(LorenzParams(10.0, 2.0, 1.0)).c_plus == (1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        fixed_points(SimpleNamespace(sigma=10.0, r=1.0, b=8 / 3))


def test_fixed_point_residual():
    rng = np.random.default_rng(8)
    for _ in range(100):
        p = LorenzParams(*rng.uniform([0.5, 1.01, 0.1], [30, 30, 30]))
        fps = fixed_points(p)
        for c in (fps.c_plus, fps.c_minus, fps.origin):
            for v in (YA, YB):
                assert all(abs(x) < 1e-12 for x in floats(lorenz_rhs(p, c, v, P64)))


# -- destiny ---------------------------------------------------------------------


def make_traj(times, states):
    return SimpleNamespace(times=np.asarray(times, float), states=np.asarray(states, float))


def test_constant_at_c_plus(fps_r20):
    t = np.linspace(0, 10, 101)
    traj = make_traj(t, np.tile(fps_r20.c_plus, (t.size, 1)))
    assert classify_destiny(traj, fps_r20) == (Destiny.C_PLUS, 0.0)


def test_short_horizon_is_undecided(fps_r20):
    t = np.linspace(0, 1, 11)
    traj = make_traj(t, np.tile(fps_r20.c_plus, (t.size, 1)))
    assert classify_destiny(traj, fps_r20) == (Destiny.UNDECIDED, math.inf)


def test_permanence_is_required(fps_r20):
    # enters the ball, leaves, then re-enters for good at t=6
    t = np.arange(0, 12.01, 0.5)
    cp = np.asarray(fps_r20.c_plus)
    states = np.tile(cp, (t.size, 1))
    states[t < 2] += 10.0
    states[(t > 3) & (t < 6)] += 5.0
    destiny, ts = classify_destiny(make_traj(t, states), fps_r20)
    assert destiny is Destiny.C_PLUS and ts == 6.0


def test_destiny_errors(fps_r20):
    with pytest.raises(EmptyTrajectoryError):
        classify_destiny(make_traj([], np.empty((0, 3))), fps_r20)
    t = np.linspace(0, 10, 11)
    traj = make_traj(t, np.zeros((11, 3)))
    with pytest.raises(ValueError):
        classify_destiny(traj, fps_r20, eps_settle=0.0)
    with pytest.raises(ValueError):
        classify_destiny(traj, fps_r20, t_hold=-1.0)


def test_label_equivariance(fps_r20):
    rng = np.random.default_rng(2)
    t = np.arange(0, 20.01, 0.1)
    for _ in range(20):
        target = fps_r20.c_plus if rng.random() < 0.5 else fps_r20.c_minus
        decay = np.exp(-0.4 * t)[:, None]
        states = np.asarray(target) + decay * rng.uniform(-15, 15, 3)
        traj = make_traj(t, states)
        mirrored = make_traj(t, states * np.array([-1.0, -1.0, 1.0]))
        d, ts = classify_destiny(traj, fps_r20)
        dm, tsm = classify_destiny(mirrored, fps_r20)
        assert d is not Destiny.UNDECIDED
        assert dm is d.mirrored() and tsm == ts
