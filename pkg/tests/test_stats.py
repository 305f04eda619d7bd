"""Correlation machinery and offset removal."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats as scipy_stats

from lodem.errors import DomainError
from lodem.stats import (
    CorrelationResult,
    offset_removal,
    pearson,
    regularized_incomplete_beta,
    student_t_cdf,
)


class TestIncompleteBeta:
    def test_boundaries(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0

    def test_against_scipy_grid(self):
        for a in (0.5, 1.0, 2.5, 10.0, 104.0):
            for b in (0.5, 1.0, 3.0, 7.5):
                for x in (0.01, 0.2, 0.5, 0.8, 0.99):
                    ours = regularized_incomplete_beta(a, b, x)
                    ref = float(special.betainc(a, b, x))
                    assert ours == pytest.approx(ref, abs=1e-10)

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            regularized_incomplete_beta(0.0, 1.0, 0.5)
        with pytest.raises(DomainError):
            regularized_incomplete_beta(1.0, 1.0, 1.5)


class TestStudentT:
    def test_cdf_at_zero_exact(self):
        for df in (1, 2, 5, 30, 206):
            assert student_t_cdf(0.0, df) == 0.5

    def test_symmetry(self):
        for df in (1, 3, 10, 100):
            for t in (0.3, 1.0, 2.5, 7.0):
                lhs = student_t_cdf(-t, df)
                rhs = 1.0 - student_t_cdf(t, df)
                assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_against_scipy(self):
        for df in (1, 2, 6, 30, 206):
            for t in (-4.0, -1.3, -0.2, 0.5, 1.9, 6.0):
                ours = student_t_cdf(t, df)
                ref = float(scipy_stats.t.cdf(t, df))
                assert ours == pytest.approx(ref, abs=1e-10)

    def test_standard_quantile(self):
        # the classic two-sided 95% point for 10 degrees of freedom
        assert 1.0 - student_t_cdf(2.228, 10) == pytest.approx(0.025, abs=5e-4)


class TestPearson:
    def test_perfect_line(self):
        xs = [1.0, 2.0, 3.0, 4.0, 5.0]
        ys = [2 * x + 1 for x in xs]
        result = pearson(xs, ys)
        assert result.r == pytest.approx(1.0, abs=1e-12)
        assert result.p_value < 1e-12

    def test_hand_computed_example(self):
        result = pearson([1, 2, 3, 4], [1, 3, 2, 4])
        assert result.r == pytest.approx(0.8, abs=1e-12)
        assert result.p_value == pytest.approx(0.2, abs=1e-10)
        assert result.n == 4

    def test_large_sample_small_r(self):
        # r = 0.157 over n = 208 points: p from the t-tail is about 0.0235
        rng = np.random.default_rng(0)
        # build data with exactly the wanted r via two orthogonal unit vectors
        n = 208
        base = rng.normal(size=n)
        noise = rng.normal(size=n)
        noise -= noise.mean()
        base -= base.mean()
        noise -= base * (noise @ base) / (base @ base)
        r_target = 0.157
        ys = r_target * base / np.linalg.norm(base) + math.sqrt(
            1 - r_target**2
        ) * noise / np.linalg.norm(noise)
        result = pearson(list(base), list(ys))
        assert result.r == pytest.approx(r_target, abs=1e-12)
        ref = float(2 * scipy_stats.t.sf(abs(0.157) * math.sqrt(206 / (1 - 0.157**2)), 206))
        assert result.p_value == pytest.approx(ref, abs=1e-10)
        assert result.p_value == pytest.approx(0.0235, abs=1.5e-3)

    def test_matches_scipy_pearsonr(self):
        rng = np.random.default_rng(5)
        for n in (5, 12, 40):
            xs = rng.normal(size=n)
            ys = rng.normal(size=n)
            ours = pearson(list(xs), list(ys))
            ref_r, ref_p = scipy_stats.pearsonr(xs, ys)
            assert ours.r == pytest.approx(float(ref_r), abs=1e-12)
            assert ours.p_value == pytest.approx(float(ref_p), abs=1e-8)

    def test_needs_three_points(self):
        with pytest.raises(DomainError):
            pearson([1.0, 2.0], [1.0, 2.0])

    def test_zero_variance_rejected(self):
        with pytest.raises(DomainError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            pearson([1.0, 2.0, 3.0], [1.0, 2.0])

    @given(
        st.lists(st.floats(min_value=-50, max_value=50), min_size=4, max_size=20),
        st.floats(min_value=0.1, max_value=5.0),
        st.floats(min_value=-10.0, max_value=10.0),
    )
    @settings(max_examples=40)
    def test_affine_invariance(self, xs, scale, shift):
        rng = np.random.default_rng(abs(hash(tuple(xs))) % 2**32)
        ys = list(rng.normal(size=len(xs)))
        if np.var(xs) < 1e-6 or np.var(ys) < 1e-6:
            return
        base = pearson(xs, ys)
        scaled = pearson([scale * x + shift for x in xs], ys)
        assert scaled.r == pytest.approx(base.r, abs=1e-9)
        assert scaled.p_value == pytest.approx(base.p_value, abs=1e-9)

    def test_result_validation(self):
        with pytest.raises(DomainError):
            CorrelationResult(r=1.5, p_value=0.5, n=10)
        with pytest.raises(DomainError):
            CorrelationResult(r=0.5, p_value=1.5, n=10)
        with pytest.raises(DomainError):
            CorrelationResult(r=0.5, p_value=0.5, n=2)


class TestOffsetRemoval:
    def test_single_set_is_identity(self):
        values = {("sl", 1, 0): -2.0, ("sl", 2, 0): -1.5, ("sl", 4, 0): -1.2}
        assert offset_removal(values) == pytest.approx(values)

    def test_worked_example(self):
        # two sets with smallest-size scores 1 and 3, one larger entry of 2
        values = {
            ("m", 1, 0): 1.0,
            ("m", 1, 1): 3.0,
            ("m", 2, 0): 2.0,
        }
        adjusted = offset_removal(values)
        assert adjusted[("m", 2, 0)] == pytest.approx(3.0)
        assert adjusted[("m", 1, 0)] == pytest.approx(2.0)
        assert adjusted[("m", 1, 1)] == pytest.approx(2.0)

    def test_smallest_size_collapses_to_mean(self):
        rng = np.random.default_rng(1)
        values = {
            ("m", s, n): float(rng.normal())
            for s in (1, 2, 3)
            for n in range(4)
        }
        adjusted = offset_removal(values)
        mean_smallest = np.mean([values[("m", 1, n)] for n in range(4)])
        for n in range(4):
            assert adjusted[("m", 1, n)] == pytest.approx(mean_smallest)

    def test_per_set_shift_invariance(self):
        # per-set offsets vanish from the adjusted table; only their mean
        # survives, as a single global constant (zero-mean shifts are a no-op)
        rng = np.random.default_rng(2)
        values = {
            ("m", s, n): float(rng.normal())
            for s in (1, 2, 4)
            for n in range(3)
        }
        shifts = {0: 5.0, 1: -3.0, 2: -2.0}
        mean_shift = np.mean(list(shifts.values()))
        shifted = {
            (m, s, n): v + shifts[n] for (m, s, n), v in values.items()
        }
        a = offset_removal(values)
        b = offset_removal(shifted)
        for key in values:
            assert b[key] - a[key] == pytest.approx(mean_shift, abs=1e-12)
        zero_mean = {
            (m, s, n): v + shifts[n] - mean_shift
            for (m, s, n), v in values.items()
        }
        c = offset_removal(zero_mean)
        for key in values:
            assert c[key] == pytest.approx(a[key], abs=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        values = {
            (m, s, n): float(rng.normal())
            for m in ("a", "b")
            for s in (1, 2, 3)
            for n in range(5)
        }
        once = offset_removal(values)
        twice = offset_removal(once)
        for key in values:
            assert twice[key] == pytest.approx(once[key], abs=1e-12)

    def test_missing_smallest_entry(self):
        values = {("m", 1, 0): 1.0, ("m", 2, 0): 2.0, ("m", 2, 1): 2.5}
        with pytest.raises(DomainError):
            offset_removal(values)

    def test_empty_input(self):
        assert offset_removal({}) == {}

    def test_sizes_may_differ_between_models(self):
        values = {
            ("a", 1, 0): 1.0, ("a", 2, 0): 2.0,
            ("b", 2, 0): 3.0, ("b", 4, 0): 4.0,
        }
        adjusted = offset_removal(values)
        # model b's smallest size is 2
        assert adjusted[("b", 2, 0)] == pytest.approx(3.0)
        assert adjusted[("b", 4, 0)] == pytest.approx(4.0)
