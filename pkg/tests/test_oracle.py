import math

import numpy as np
import pytest

from strategic_signaling.metrics import evaluate
from strategic_signaling.model import ModelParams, UsageError
from strategic_signaling.oracle import SimConfig, SimEstimate, brute_force_optimal, simulate
from strategic_signaling.schemes import (
    SignalingScheme,
    Variant,
    optimal_scheme,
    optimal_scheme_relaxed,
    reject_all_scheme,
    revealing_scheme,
)

from conftest import random_params


class TestSimulate:
    def test_deterministic(self):
        params = ModelParams(0.35, 0.8)
        s = optimal_scheme(params)
        a = simulate(params, s, SimConfig(50_000, seed=4))
        b = simulate(params, s, SimConfig(50_000, seed=4))
        assert a == b
        assert simulate(params, s, SimConfig(50_000, seed=5)) != a

    def test_workers_do_not_change_result(self):
        params = ModelParams(0.35, 0.8, 0.9)
        s = optimal_scheme(params)
        a = simulate(params, s, SimConfig(600_000, seed=1))
        b = simulate(params, s, SimConfig(600_000, seed=1, workers=3))
        assert a == b

    def test_zero_students(self):
        with pytest.raises(UsageError):
            SimConfig(0)

    def test_reject_all(self):
        params = ModelParams(0.35, 0.8)
        est = simulate(params, reject_all_scheme(Variant.NO_TEST), SimConfig(10_000, seed=1))
        assert est.utility.mean == 0.0 and est.fnr.mean == 1.0

    def test_close_to_exact(self):
        params = ModelParams(0.35, 0.8)
        est = simulate(params, optimal_scheme(params), SimConfig(1_000_000, seed=2))
        assert abs(est.utility.z(0.6066666666666667)) < 3

    def test_obedience_observed(self):
        rng = np.random.default_rng(21)
        for kind in ("notest", "test"):
            for params in random_params(rng, 20, kind):
                est = simulate(params, optimal_scheme(params), SimConfig(20_000, seed=3))
                assert est.disobeyed == 0
        for params in random_params(rng, 20, "relaxed"):
            est = simulate(params, optimal_scheme_relaxed(params), SimConfig(20_000, seed=3))
            assert est.disobeyed == 0

    def test_stderr_scaling(self):
        params = ModelParams(0.35, 0.8)
        s = optimal_scheme(params)
        small = simulate(params, s, SimConfig(10_000, seed=8))
        large = simulate(params, s, SimConfig(1_000_000, seed=8))
        for k in SimEstimate.METRICS:
            ratio = getattr(small, k).stderr / getattr(large, k).stderr
            assert 8 <= ratio <= 12.5, k

    def test_json(self):
        params = ModelParams(0.35, 0.8)
        est = simulate(params, revealing_scheme(Variant.NO_TEST), SimConfig(1000, seed=1))
        assert SimEstimate.from_dict(est.to_dict()) == est

    def test_university_independent_of_signal(self):
        # a scheme that is not obeyed: every student gets the accept signal
        params = ModelParams(0.35, 0.8)
        s = SignalingScheme(Variant.NO_TEST, {1: 1.0, 0: 1.0})
        est = simulate(params, s, SimConfig(10_000, seed=1))
        assert est.utility.mean == 0.0 and est.disobeyed == 10_000


class TestBruteForce:
    def test_no_test(self):
        s, u = brute_force_optimal(ModelParams(0.35, 0.8), Variant.NO_TEST)
        assert abs(s.prob(0) - 1 / 3) <= 1e-3
        assert u <= 0.6066666666666667 + 1e-9

    def test_relaxed_point(self):
        s, u = brute_force_optimal(ModelParams(0.25, 0.9, 0.7))
        assert abs(s.accept_prob[(0, 0)] - 0.032258) <= 1e-3
        assert abs(s.accept_prob[(0, 1)] - 0.729730) <= 1e-3

    @pytest.mark.parametrize("p", [0.1, 0.3, 0.45])
    def test_grade_boundary(self, p):
        s, u = brute_force_optimal(ModelParams(p, 1 - p))
        assert s.prob(0) == 0.0
        assert u == pytest.approx(2 * p * (1 - p), abs=1e-12)

    def test_full_grid(self):
        params = ModelParams(0.3, 0.95, 0.6)
        _, u_coarse = brute_force_optimal(params, full_grid=True)
        exact = evaluate(params, optimal_scheme_relaxed(params)).school_utility
        assert exact - 0.05 <= u_coarse <= exact + 1e-9

    def test_resolution_range(self):
        with pytest.raises(UsageError):
            brute_force_optimal(ModelParams(0.35, 0.8), resolution=0.5)

    def test_never_beats_closed_form(self):
        rng = np.random.default_rng(31)
        for params in random_params(rng, 30, "test"):
            _, u = brute_force_optimal(params)
            assert u <= evaluate(params, optimal_scheme(params)).school_utility + 1e-9
