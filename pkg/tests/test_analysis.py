import json

import numpy as np
import pytest

from strategic_signaling.analysis import (
    BoundCheck,
    FIGURE_COLUMNS,
    SweepResult,
    check_figure_regimes,
    check_fpr_fnr_comparison,
    check_monotonicity,
    check_test_ratio_lemmas,
    check_utility_comparison,
    checks_from_json,
    checks_to_json,
    figure_data,
    metric_sweep,
    ratio_with_test,
)
from strategic_signaling.model import ModelParams, UsageError, regime_boundaries


def by_name(checks):
    return {c.name: c for c in checks}


class TestBoundCheck:
    def test_holds_threshold(self):
        assert BoundCheck("a", -1e-9).holds
        assert not BoundCheck("a", -2e-9).holds

    def test_json(self):
        checks = [BoundCheck("a", 0.5, {"q": 0.7}), BoundCheck("b", -1.0)]
        back = checks_from_json(checks_to_json(checks))
        assert back == checks
        assert json.loads(checks_to_json(checks))[1]["holds"] is False


class TestComparisons:
    def test_utility_suite(self):
        checks = check_utility_comparison(0.35)
        assert len([c for c in checks if not c.name.startswith("tight:")]) == 6
        assert all(c.holds for c in checks)

    def test_gain_ratio_tight(self):
        c = by_name(check_utility_comparison(0.35))
        assert abs(c["tight:strategic_gain_bounded"].margin) <= 1e-9
        assert abs(c["tight:strategic_at_most_double"].margin) <= 1e-12

    def test_rate_suite(self):
        checks = check_fpr_fnr_comparison(0.35)
        assert len([c for c in checks if not c.name.startswith("tight:")]) == 8
        assert all(c.holds for c in checks)

    def test_fnr_ratio_limit(self):
        c = by_name(check_fpr_fnr_comparison(0.35))["tight:signaling_fnr_lower"]
        assert abs(c.margin) <= 1e-9

    def test_fpr_ratio_at_boundary(self):
        c = by_name(check_fpr_fnr_comparison(0.35))["tight:signaling_raises_fpr"]
        assert c.margin == 0.0

    def test_random_search(self):
        rng = np.random.default_rng(99)
        for p in rng.uniform(0.005, 0.495, 500):
            q = np.sort(rng.uniform(1 - p, 1, 200))
            for c in check_utility_comparison(p, q) + check_fpr_fnr_comparison(p, q):
                if not c.name.startswith("tight:"):
                    assert c.holds, (p, c)

    def test_grid_outside_range(self):
        with pytest.raises(UsageError):
            check_utility_comparison(0.35, [0.5, 0.9])

    def test_coarse_grid_margin_positive(self):
        checks = check_utility_comparison(0.35, np.linspace(0.65, 1, 5))
        assert by_name(checks)["revealing_decreasing"].margin > 0


class TestMonotonicity:
    def test_no_test(self):
        checks = check_monotonicity(0.35)
        assert all(c.holds and c.margin > 0 for c in checks)

    def test_with_test_segments(self):
        c = by_name(check_monotonicity(0.35, 0.8))
        for name in ("low_segment_revealing", "low_segment_strategic", "mid_segment_strategic"):
            assert c[name].holds
        assert c["mid_segment_revealing"].margin > 0
        assert c["high_segment_revealing"].margin > 0
        assert c["high_segment_strategic"].margin > 0
        assert c["revealing_drops_at_q1"].margin > 0.1
        assert c["revealing_jumps_at_q2"].margin > 0.1
        assert c["strategic_jumps_at_q2"].margin > 0.1

    def test_segment_values(self):
        res = figure_data(0.35, 0.8)
        assert res.row_at(0.7)["U_r_test"] == pytest.approx(0.235, abs=1e-12)
        assert res.row_at(0.9)["U_r_test"] == pytest.approx(0.38, abs=1e-12)
        q1, q2 = regime_boundaries(0.35, 0.8)
        q = res.values
        ur, us = res.column("U_r_test"), res.column("U_s_test")
        assert np.allclose(ur[q < q1], 0.41, atol=1e-12)
        assert np.allclose(us[q < q2], 0.41, atol=1e-12)


class TestTestRatio:
    def test_noisy_grades(self):
        c = by_name(check_test_ratio_lemmas(0.35, 0.8))
        assert c["ratio_one_above_threshold"].holds
        assert c["ratio_above_one_below_threshold"].margin > 1e-6

    def test_ratio_example(self):
        assert ratio_with_test(0.35, 0.8, 0.9) == pytest.approx(1.0, abs=1e-12)

    def test_accurate_grades(self):
        checks = check_test_ratio_lemmas(0.35, 1.0)
        assert all(c.holds for c in checks)
        assert ratio_with_test(0.35, 1.0, 0.9) == pytest.approx(1.285714285714, abs=1e-12)
        assert ratio_with_test(0.35, 1.0, 1.0) == 1.0


class TestFigures:
    def test_columns_and_reproducible(self):
        a = figure_data(0.35, 0.65)
        b = figure_data(0.35, 0.65)
        assert a.columns == FIGURE_COLUMNS
        assert a.to_csv() == b.to_csv()
        assert a.to_csv().splitlines()[0] == ",".join(FIGURE_COLUMNS)

    def test_inequality_example(self):
        row = figure_data(0.35, 0.65).row_at(0.95)
        assert row["ratio_test"] == pytest.approx(1.8923344857165136, abs=1e-12)
        assert row["ratio_notest"] == pytest.approx(1.86986301369863, abs=1e-12)

    def test_warning_for_outside_boundary(self):
        assert any("q1" in w for w in figure_data(0.35, 0.65).warnings)
        assert figure_data(0.35, 0.8).warnings == []

    def test_accurate_grades_ratio(self):
        for d in (0.65, 0.8, 0.9):
            assert figure_data(0.35, d).row_at(1.0)["ratio_notest"] == pytest.approx(2.0, abs=1e-12)

    def test_csv_round_trip(self):
        res = figure_data(0.35, 0.8)
        back = SweepResult.from_csv(res.to_csv())
        assert back.rows == res.rows

    @pytest.mark.parametrize("d", [0.65, 0.75, 0.8, 0.9])
    def test_single_flip(self, d):
        res = figure_data(0.35, d)
        assert all(c.holds for c in check_figure_regimes(res, 0.35, d))

    def test_sorted(self):
        q = figure_data(0.35, 0.8, extra_q=[0.9123]).values
        assert np.all(np.diff(q) > 0) and 0.9123 in q


class TestMetricSweep:
    def test_q_axis(self):
        res = metric_sweep(ModelParams(0.35, 0.8), "q", np.linspace(0.65, 1, 5))
        assert res.column("U_s")[-1] == pytest.approx(0.7, abs=1e-12)

    def test_delta_axis(self):
        res = metric_sweep(ModelParams(0.35, 0.8, 0.8), "delta", [0.7, 0.9])
        assert res.columns[-2:] == ("regime_10", "regime_01")

    def test_bad_axis(self):
        with pytest.raises(UsageError):
            metric_sweep(ModelParams(0.35, 0.8), "delta", [0.7])
