import json

import numpy as np
import pytest
from hypothesis import given

from strategic_signaling.metrics import (
    OutcomeMetrics,
    closed_form,
    closed_form_no_test,
    closed_form_with_test,
    evaluate,
    no_test_curves,
    with_test_curves,
)
from strategic_signaling.model import AssumptionError, ModelParams, UsageError
from strategic_signaling.schemes import (
    Variant,
    optimal_scheme,
    optimal_scheme_relaxed,
    reject_all_scheme,
    revealing_scheme,
)

from conftest import no_test_params, random_params, with_test_params

TOL = 1e-12


def assert_metrics(m, utility, fpr, fnr, uu=None, tol=TOL):
    assert m.school_utility == pytest.approx(utility, abs=tol)
    assert m.fpr == pytest.approx(fpr, abs=tol)
    assert m.fnr == pytest.approx(fnr, abs=tol)
    if uu is not None:
        assert m.university_utility == pytest.approx(uu, abs=tol)


class TestEvaluate:
    def test_revealing_no_test(self):
        m = evaluate(ModelParams(0.35, 0.8), revealing_scheme(Variant.NO_TEST))
        assert_metrics(m, 0.41, 0.2, 0.2, 0.15)

    def test_optimal_no_test(self):
        params = ModelParams(0.35, 0.8)
        m = evaluate(params, optimal_scheme(params))
        assert_metrics(m, 0.6066666666666667, 0.4666666666666667, 0.13333333333333333, 0.0)

    def test_reject_all_no_test(self):
        m = evaluate(ModelParams(0.35, 0.8), reject_all_scheme(Variant.NO_TEST))
        assert_metrics(m, 0.0, 0.0, 1.0, 0.0)

    def test_reject_all_with_test_still_admits_high_scores(self):
        # the score is public: an uninformative signal leaves the university
        # admitting every high score (u(s=1) >= 0 under assumption 3)
        params = ModelParams(0.35, 0.8, 0.9)
        m = evaluate(params, reject_all_scheme(Variant.WITH_TEST))
        assert m.school_utility == pytest.approx(0.35 * 0.9 + 0.65 * 0.1, abs=TOL)

    def test_variant_mismatch(self):
        with pytest.raises(UsageError):
            evaluate(ModelParams(0.35, 0.8, 0.9), revealing_scheme(Variant.NO_TEST))

    def test_json_round_trip(self):
        m = OutcomeMetrics(0.1, 0.2, 0.3, -0.05)
        assert OutcomeMetrics.from_json(m.to_json()) == m
        assert set(json.loads(m.to_json())) == {"school_utility", "fpr", "fnr", "university_utility"}


class TestNoTest:
    @pytest.mark.parametrize("p", [0.1, 0.25, 0.35, 0.49])
    def test_accurate_grades(self, p):
        assert_metrics(closed_form_no_test(ModelParams(p, 1.0), False), p, 0.0, 0.0)
        assert_metrics(closed_form_no_test(ModelParams(p, 1.0), True), 2 * p, p / (1 - p), 0.0)

    def test_grade_boundary(self):
        params = ModelParams(0.35, 0.65)
        assert closed_form_no_test(params, False).school_utility == pytest.approx(0.455, abs=TOL)
        assert closed_form_no_test(params, True).school_utility == pytest.approx(0.455, abs=TOL)

    def test_needs_assumptions(self):
        with pytest.raises(AssumptionError):
            closed_form_no_test(ModelParams(0.3, 0.6), True)

    def test_vectorised(self):
        q = np.linspace(0.65, 1, 11)
        c = no_test_curves(0.35, q)
        assert all(v.shape == q.shape for v in c.values())

    @given(no_test_params())
    def test_matches_evaluate(self, params):
        for strategic in (False, True):
            scheme = optimal_scheme(params) if strategic else revealing_scheme(Variant.NO_TEST)
            a, b = closed_form_no_test(params, strategic), evaluate(params, scheme)
            assert_metrics(a, b.school_utility, b.fpr, b.fnr, b.university_utility)


class TestWithTest:
    def test_revealing_example(self):
        # u(1,0) >= 0, u(0,1) < 0: high grades admitted
        m = closed_form_with_test(ModelParams(0.25, 0.9, 0.7), False)
        assert_metrics(m, 0.30, 0.1, 0.1, 0.15)

    def test_strategic_needs_assumption_3(self):
        with pytest.raises(AssumptionError):
            closed_form_with_test(ModelParams(0.25, 0.9, 0.7), True)

    def test_strategic_low_grade_high_score(self):
        m = closed_form_with_test(ModelParams(0.35, 0.8, 0.9), True)
        assert_metrics(m, 0.38, 0.1, 0.1, 0.25)

    def test_strategic_packing_branch(self):
        m = closed_form_with_test(ModelParams(0.35, 0.95, 0.65), True)
        assert_metrics(m, 0.6907020872865275, 0.5313092979127134, 0.013282732447817837, 0.0)

    @pytest.mark.parametrize("p", [0.1, 0.25, 0.35, 0.49])
    @pytest.mark.parametrize("d", [0.7, 0.9, 1.0])
    def test_accurate_grades_curves(self, p, d):
        c = with_test_curves(ModelParams(p, 1.0, d))
        assert c["U_s"] == pytest.approx(1 - d + p, abs=TOL)
        assert c["U_r"] == pytest.approx(p, abs=TOL)
        assert c["FPR_s"] == pytest.approx((1 - d) / (1 - p), abs=TOL)
        assert c["FNR_s"] == pytest.approx(0.0, abs=TOL)

    @pytest.mark.parametrize("d", [0.55, 0.7, 0.9, 1.0])
    def test_revealing_accurate_grades(self, d):
        assert closed_form_with_test(ModelParams(0.3, 1.0, d), False).school_utility == pytest.approx(0.3, abs=TOL)

    def test_matches_evaluate_random(self):
        rng = np.random.default_rng(17)
        for params in random_params(rng, 10_000, "test"):
            for strategic in (False, True):
                scheme = optimal_scheme(params) if strategic else revealing_scheme(Variant.WITH_TEST)
                a, b = closed_form_with_test(params, strategic), evaluate(params, scheme)
                assert_metrics(a, b.school_utility, b.fpr, b.fnr, b.university_utility)

    def test_relaxed_point(self):
        # exact rational optimum at a point violating assumption 3
        params = ModelParams(0.25, 0.9, 0.7)
        m = evaluate(params, optimal_scheme_relaxed(params))
        assert_metrics(m, 0.47602441150828245, 0.31734960767218834, 0.04795117698343505, 0.0)

    def test_relaxed_example(self):
        params = ModelParams(0.3, 0.95, 0.6)
        m = evaluate(params, optimal_scheme_relaxed(params))
        assert_metrics(m, 0.5838358036059049, 0.4170255740042178, 0.026940327323491848, 0.0)


@given(with_test_params())
def test_rate_identities(params):
    for strategic in (False, True):
        m = closed_form(params, strategic)
        p = params.p
        assert p * (1 - m.fnr) + (1 - p) * m.fpr == pytest.approx(m.school_utility, abs=TOL)
        assert p * (1 - m.fnr) - (1 - p) * m.fpr == pytest.approx(m.university_utility, abs=TOL)
        assert -TOL <= m.fpr <= 1 + TOL and -TOL <= m.fnr <= 1 + TOL


@given(no_test_params())
def test_interior_packing_zero_university_utility(params):
    scheme = optimal_scheme(params)
    if 0 < scheme.prob(0) < 1:
        assert evaluate(params, scheme).university_utility == pytest.approx(0.0, abs=TOL)
