import json
import math

import pytest

from transient_verify.error_budget import Dominant, Verdict
from transient_verify.fp_modes import PrecisionMode
from transient_verify.lorenz import Destiny, RhsVariant, State3
from transient_verify.pipeline import (
    NOT_SUFFICIENT_NOTE,
    REFERENCE_IC,
    Conclusion,
    LyapunovSettings,
    PipelineConfig,
    disagreement_sweep,
    run_validity_test,
    variant_agreement,
)

P32, P64, PDD = PrecisionMode.P32, PrecisionMode.P64, PrecisionMode.PDD
CP, CM, UN = Destiny.C_PLUS, Destiny.C_MINUS, Destiny.UNDECIDED


@pytest.fixture(scope="module")
def reference_report():
    return run_validity_test(PipelineConfig(ic=REFERENCE_IC, ladder=(P32, P64)))


def check_report_invariants(report, cfg):
    modes = [r.mode for r in report.per_rung]
    assert modes == list(cfg.ladder[: len(modes)])
    validated_rungs = [
        r
        for r in report.per_rung
        if r.budget is not None
        and r.budget.verdict is Verdict.PASS
        and r.variants_agree
        and all(v.destiny is not UN for v in r.variants)
    ]
    assert (report.conclusion is Conclusion.VALIDATED) == bool(validated_rungs)
    if report.conclusion is Conclusion.VALIDATED:
        # escalation stops at the first validating rung
        assert report.per_rung[-1] is validated_rungs[0]
        assert report.final_rung is report.per_rung[-1].mode
        b = report.per_rung[-1].budget
        assert b.delta_final <= b.margin_eta * b.attractor_diagonal
    budgets = [r.budget for r in report.per_rung if r.budget is not None]
    for lo, hi in zip(budgets, budgets[1:]):
        assert hi.delta0 <= lo.delta0


# -- agreement -------------------------------------------------------------------


def test_variant_agreement_examples():
    assert variant_agreement([CP, CP]) is True
    assert variant_agreement([CP, CM]) is False
    assert variant_agreement([CP, UN]) is False
    assert variant_agreement([UN, UN]) is False
    with pytest.raises(ValueError):
        variant_agreement([CP])


# -- config ----------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(ladder=(P64, P32))
    with pytest.raises(ValueError):
        PipelineConfig(ladder=(P32, P32))
    with pytest.raises(ValueError):
        PipelineConfig(variants=(RhsVariant.YA,))
    with pytest.raises(ValueError):
        PipelineConfig(dt=0.0)


def test_config_round_trip():
    cfg = PipelineConfig(ladder=(P32, P64), lyapunov=LyapunovSettings(ensemble_size=4))
    again = PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({**cfg.to_dict(), "bogus": 1})


# -- validity test ---------------------------------------------------------------


def test_reference_scenario(reference_report):
    rungs = reference_report.per_rung
    assert [r.mode for r in rungs] == [P32, P64]
    low, high = rungs
    assert low.budget.verdict is Verdict.FAIL
    assert low.budget.dominant is Dominant.ROUNDOFF
    assert low.budget.delta_final / low.budget.attractor_diagonal > 1e3
    assert high.budget.verdict is Verdict.PASS
    assert high.variants_agree
    assert reference_report.conclusion is Conclusion.VALIDATED
    assert reference_report.final_rung is P64
    assert 0.6 <= reference_report.lyapunov.lam <= 1.1
    assert NOT_SUFFICIENT_NOTE in reference_report.notes
    check_report_invariants(reference_report, PipelineConfig(ladder=(P32, P64)))


def test_single_low_rung_exhausts():
    cfg = PipelineConfig(ic=REFERENCE_IC, ladder=(P32,))
    report = run_validity_test(cfg)
    assert report.conclusion is Conclusion.LADDER_EXHAUSTED
    assert report.final_rung is None
    assert report.per_rung[0].budget.verdict is Verdict.FAIL
    check_report_invariants(report, cfg)


def test_fixed_point_ic_validates_at_first_rung(fps_r20):
    cfg = PipelineConfig(ic=fps_r20.c_plus, ladder=(P32, P64, PDD))
    report = run_validity_test(cfg)
    assert report.conclusion is Conclusion.VALIDATED
    assert report.final_rung is P32 and len(report.per_rung) == 1
    b = report.per_rung[0].budget
    assert b.delta_t == 0.0 and b.delta_final == b.delta0
    assert all(v.destiny is CP and v.settle_time == 0.0 for v in report.per_rung[0].variants)
    check_report_invariants(report, cfg)


def test_report_dict_shape(reference_report):
    d = reference_report.to_dict()
    assert set(d) == {"conclusion", "final_rung", "per_rung"}
    assert d["conclusion"] == "Validated" and d["final_rung"] == "p64"
    for rung in d["per_rung"]:
        assert set(rung) == {"mode", "budget", "variants", "variants_agree"}
        for v in rung["variants"]:
            assert set(v) == {"variant", "destiny", "settle_time"}
    json.dumps(d, allow_nan=False)


def test_reports_are_deterministic():
    cfg = PipelineConfig(ic=REFERENCE_IC, ladder=(P32, P64), lyapunov=LyapunovSettings(ensemble_size=3))
    a = json.dumps(run_validity_test(cfg).to_dict(), sort_keys=True)
    b = json.dumps(run_validity_test(cfg).to_dict(), sort_keys=True)
    assert a == b


# -- sweep -----------------------------------------------------------------------


def test_sweep_on_fixed_points(fps_r20):
    res = disagreement_sweep(PipelineConfig(), [fps_r20.c_plus, fps_r20.c_minus], P32)
    assert (res.n_total, res.n_disagree, res.fraction) == (2, 0, 0.0)
    assert len(res.rows) == 4


def test_sweep_errors_count_as_undecided(fps_r20):
    blowup = State3(1e20, 1e20, 1e20)
    res = disagreement_sweep(PipelineConfig(), [fps_r20.c_plus, blowup], P32)
    assert res.n_disagree == 1
    bad = [r for r in res.rows if r.ic == blowup]
    assert all(r.destiny is UN and math.isinf(r.settle_time) for r in bad)


def test_sweep_rejects_empty():
    with pytest.raises(ValueError):
        disagreement_sweep(PipelineConfig(), [], P64)
