import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transient_verify.diagnostics import AttractorExtent, ChaoticSegment, LyapunovEstimate
from transient_verify.error_budget import (
    Dominant,
    ErrorBudget,
    Verdict,
    assemble_budget,
    final_error,
    roundoff_delta0,
    truncation_delta0,
)
from transient_verify.fp_modes import PrecisionMode

P32, P64, PDD = PrecisionMode.P32, PrecisionMode.P64, PrecisionMode.PDD


def test_roundoff_examples():
    assert roundoff_delta0(P32, 1e2) == pytest.approx(5.96e-6, rel=1e-3)
    assert roundoff_delta0(P64, 1e2) == pytest.approx(1.11e-14, rel=1e-3)
    assert roundoff_delta0(P32, 1.0) == pytest.approx(5.96e-8, rel=1e-3)
    with pytest.raises(ValueError):
        roundoff_delta0(P32, 0.0)


def test_truncation_examples():
    assert truncation_delta0(1e-3, 5) == pytest.approx(1e-15, rel=1e-12)
    assert truncation_delta0(1.0, 5) == 1.0
    assert truncation_delta0(1e-2, 5) == pytest.approx(1e-10, rel=1e-12)
    with pytest.raises(ValueError):
        truncation_delta0(0.0)


def test_final_error_examples():
    assert final_error(1e-5, 0.83, 38) == pytest.approx(4.98e8, rel=1e-2)
    assert final_error(1e-14, 0.83, 38) == pytest.approx(0.50, rel=1e-2)
    assert final_error(1e-5, 0.83, 0) == 1e-5


def test_final_error_saturates():
    assert final_error(1e-5, 10.0, 1e4) == math.inf
    with pytest.raises(ValueError):
        final_error(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        final_error(1.0, 1.0, -1.0)


def test_worked_orders_of_magnitude():
    big = final_error(1e-5, 0.83, 38)
    small = final_error(1e-14, 0.83, 38)
    assert round(math.log10(big)) == 9 and 2.5e8 <= big <= 1e9
    assert round(math.log10(small)) == 0 and 0.25 <= small <= 1.2
    # both sit just past a factor of 2 below the round powers of ten
    assert 1e9 / big == pytest.approx(2.006, abs=1e-3)
    assert 1.0 / small == pytest.approx(2.006, abs=1e-3)


def test_budget_p32_example():
    b = assemble_budget(P32, 1e-3, 1e2, 0.83, 38.0, 60.0, 0.01)
    assert b.dominant is Dominant.ROUNDOFF
    assert b.delta_final == pytest.approx(2.0**-24 * 1e2 * math.exp(0.83 * 38), rel=1e-12)
    assert b.delta_final == pytest.approx(2.97e8, rel=1e-2)
    assert b.verdict is Verdict.FAIL


def test_budget_pdd_example():
    b = assemble_budget(PDD, 1e-3, 1e2, 0.83, 38.0, 60.0, 0.01)
    assert b.delta0_roundoff == pytest.approx(4.93e-30, rel=1e-2)
    assert b.delta0_truncation == pytest.approx(1e-15, rel=1e-12)
    assert b.dominant is Dominant.TRUNCATION
    assert b.delta_final == pytest.approx(5e-2, rel=0.05)
    assert b.verdict is Verdict.PASS


def test_budget_no_amplification():
    b = assemble_budget(P64, 1e-3, 1e2, 0.0, 0.0, 10.0)
    assert b.delta_final == b.delta0
    assert b.verdict is Verdict.PASS


def test_budget_accepts_diagnostic_objects():
    b = assemble_budget(
        P64,
        1e-3,
        190.0,
        LyapunovEstimate(0.8, 0.3, 60, 0.5, 1e-9),
        ChaoticSegment(0.0, 33.5),
        AttractorExtent((30.0, 35.0, 29.0), 54.4),
    )
    assert (b.lam, b.delta_t, b.attractor_diagonal) == (0.8, 33.5, 54.4)


def test_budget_accumulation_flag():
    base = assemble_budget(P64, 1e-3, 1e2, 0.8, 10.0, 50.0)
    lin = assemble_budget(P64, 1e-3, 1e2, 0.8, 10.0, 50.0, accumulate="linear")
    sq = assemble_budget(P64, 1e-3, 1e2, 0.8, 10.0, 50.0, accumulate="sqrt")
    assert lin.delta0 == pytest.approx(base.delta0 * 1e4)
    assert sq.delta0 == pytest.approx(base.delta0 * 100)
    with pytest.raises(ValueError):
        assemble_budget(P64, 1e-3, 1e2, 0.8, 10.0, 50.0, accumulate="cubic")


def test_budget_dict_keys():
    d = assemble_budget(P32, 1e-3, 1e2, 0.83, 38.0, 60.0).to_dict()
    assert set(d) == {
        "delta0_roundoff", "delta0_truncation", "dominant", "lambda", "delta_t",
        "delta_final", "attractor_diagonal", "margin_eta", "verdict",
    }
    assert d["dominant"] == "Roundoff" and d["verdict"] == "Fail"


pos = st.floats(min_value=1e-30, max_value=1e-2)
rate = st.floats(min_value=0.01, max_value=3.0)
span = st.floats(min_value=0.01, max_value=100.0)


@settings(max_examples=300)
@given(pos, rate, span, st.floats(min_value=1.01, max_value=10.0))
def test_final_error_monotone(d0, lam, dt, k):
    base = final_error(d0, lam, dt)
    assert final_error(d0 * k, lam, dt) > base
    assert final_error(d0, lam * k, dt) > base
    assert final_error(d0, lam, dt * k) > base


def test_final_error_monotone_random_triples():
    rng = np.random.default_rng(12)
    for _ in range(10_000):
        d0 = 10 ** rng.uniform(-30, -2)
        lam = rng.uniform(0.01, 3)
        dt = rng.uniform(0.01, 100)
        k = rng.uniform(1.01, 2)
        base = final_error(d0, lam, dt)
        assert final_error(d0 * k, lam, dt) > base
        assert final_error(d0, lam * k, dt) > base
        assert final_error(d0, lam, dt * k) > base


@settings(max_examples=300)
@given(pos, pos)
def test_dominance(r, t):
    b = ErrorBudget(P64, r, t, 0.5, 1.0, 10.0)
    assert (b.dominant is Dominant.ROUNDOFF) == (r >= t)
    assert b.delta0 == max(r, t)


def test_dominance_tie_goes_to_roundoff():
    assert ErrorBudget(P64, 1e-15, 1e-15, 0.5, 1.0, 10.0).dominant is Dominant.ROUNDOFF


def test_verdict_flips_at_threshold():
    b = ErrorBudget(P64, 1e-3, 1e-15, 0.0, 0.0, 0.1, margin_eta=0.01)
    assert b.delta_final == 1e-3
    diag = b.delta_final / 0.01
    at = ErrorBudget(P64, 1e-3, 1e-15, 0.0, 0.0, diag, margin_eta=0.01)
    # nudge the diagonal one ulp either side of the crossing
    up = math.nextafter(diag, math.inf)
    down = diag
    while 0.01 * down >= 1e-3:
        down = math.nextafter(down, 0.0)
    assert ErrorBudget(P64, 1e-3, 1e-15, 0.0, 0.0, up, margin_eta=0.01).verdict is Verdict.PASS
    assert ErrorBudget(P64, 1e-3, 1e-15, 0.0, 0.0, down, margin_eta=0.01).verdict is Verdict.FAIL
    assert at.verdict is (Verdict.PASS if 0.01 * diag >= 1e-3 else Verdict.FAIL)


def test_saturated_budget_fails():
    b = ErrorBudget(P32, 1e-5, 1e-15, 10.0, 1e4, 100.0)
    assert b.delta_final_saturated and b.verdict is Verdict.FAIL
