"""Metrics and paired significance testing."""

import math
import random

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln

from revhelp.evaluation import (
    compare_systems,
    evaluate,
    metrics_tsv_rows,
    paired_t_test,
    render_metrics_grid,
)


def t_density(x, df):
    log_norm = gammaln((df + 1) / 2) - gammaln(df / 2) - 0.5 * math.log(df * math.pi)
    return math.exp(log_norm) * (1 + x * x / df) ** (-(df + 1) / 2)


def two_tailed_p_by_quadrature(t, df):
    """Oracle: integrate the Student-t density numerically for one tail."""
    tail, _ = integrate.quad(t_density, abs(t), np.inf, args=(df,))
    return 2.0 * tail


class TestEvaluate:
    def test_perfect_predictions(self):
        report = evaluate([1, 2, 3], [1, 2, 3])
        assert (report.accuracy, report.mae, report.mse) == (1.0, 0.0, 0.0)

    def test_hand_computed(self):
        report = evaluate([1, 3], [2, 1])
        assert report.accuracy == 0.0
        assert report.mae == pytest.approx(1.5)
        assert report.mse == pytest.approx(2.5)
        assert report.per_example == [(2, 1, 1.0, 1.0, False), (1, 3, 2.0, 4.0, False)]

    def test_length_mismatch_fatal(self):
        with pytest.raises(ValueError):
            evaluate([1, 2], [1])

    def test_empty_fatal(self):
        with pytest.raises(ValueError):
            evaluate([], [])

    def test_out_of_range_classes_rejected(self):
        with pytest.raises(ValueError):
            evaluate([0], [1])
        with pytest.raises(ValueError):
            evaluate([1], [6])

    def test_permutation_invariance(self):
        rng = random.Random(11)
        preds = [rng.randint(1, 5) for _ in range(200)]
        golds = [rng.randint(1, 5) for _ in range(200)]
        base = evaluate(preds, golds)
        order = list(range(200))
        rng.shuffle(order)
        permuted = evaluate([preds[i] for i in order], [golds[i] for i in order])
        assert permuted.accuracy == base.accuracy
        assert permuted.mae == pytest.approx(base.mae, abs=1e-12)
        assert permuted.mse == pytest.approx(base.mse, abs=1e-12)

    def test_aggregates_decompose_over_per_example(self):
        rng = random.Random(5)
        preds = [rng.randint(1, 5) for _ in range(257)]
        golds = [rng.randint(1, 5) for _ in range(257)]
        report = evaluate(preds, golds)
        n = report.n
        assert (report.accuracy * n) == pytest.approx(round(report.accuracy * n), abs=1e-9)
        assert report.mae == pytest.approx(sum(report.abs_errors()) / n, abs=1e-12)
        assert report.mse == pytest.approx(sum(report.sq_errors()) / n, abs=1e-12)
        assert report.mae <= 4.0 and report.mse <= 16.0


class TestPairedTTest:
    def test_identical_samples_degenerate(self):
        result = paired_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert result.p_value == 1.0
        assert result.degenerate and not result.significant

    def test_constant_nonzero_difference(self):
        b = [float(i) for i in range(10)]
        a = [x + 1.0 for x in b]
        result = paired_t_test(a, b)
        assert math.isinf(result.t_statistic) and result.t_statistic > 0
        assert result.p_value == 0.0 and result.significant

    def test_reference_case_against_quadrature_oracle(self):
        result = paired_t_test([1, 2, 3, 4], [2, 2, 4, 5])
        assert result.t_statistic == pytest.approx(-3.0, abs=1e-12)
        expected_p = two_tailed_p_by_quadrature(-3.0, df=3)
        assert result.p_value == pytest.approx(expected_p, abs=1e-6)
        assert not result.significant  # p ~ 0.0577 at alpha 0.05

    def test_matches_quadrature_on_random_cases(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(4, 30))
            a = rng.normal(0.0, 1.0, n)
            b = a + rng.normal(0.1, 0.5, n)
            result = paired_t_test(list(a), list(b))
            expected = two_tailed_p_by_quadrature(result.t_statistic, n - 1)
            assert result.p_value == pytest.approx(expected, abs=1e-9)

    def test_antisymmetry(self):
        rng = np.random.default_rng(9)
        a = list(rng.normal(size=12))
        b = list(rng.normal(size=12))
        forward = paired_t_test(a, b)
        backward = paired_t_test(b, a)
        assert forward.t_statistic == pytest.approx(-backward.t_statistic, abs=1e-12)
        assert forward.p_value == pytest.approx(backward.p_value, abs=1e-12)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            paired_t_test([1.0], [2.0])


class TestComparison:
    def test_compare_systems_and_grid(self):
        golds = [1, 2, 3, 4, 5] * 8
        good = list(golds)
        noisy = [min(5, g + (i % 3 == 0)) for i, g in enumerate(golds)]
        reports = {
            "better": evaluate(good, golds),
            "reference": evaluate(noisy, golds),
        }
        results = compare_systems(reports, "reference")
        assert set(results) == {"better"}
        assert set(results["better"]) == {"accuracy", "mae", "mse"}
        grid = render_metrics_grid(reports, results, "reference")
        assert "reference" in grid and "better" in grid
        rows = metrics_tsv_rows(reports)
        assert rows[0].startswith("system\t") and len(rows) == 3

    def test_unknown_reference_rejected(self):
        reports = {"a": evaluate([1], [1])}
        with pytest.raises(KeyError):
            compare_systems(reports, "missing")
