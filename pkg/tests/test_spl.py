"""Self-paced weighting tests: quantile law, closed-form weights, schedule."""

import math

import numpy as np
import pytest

from scoretab.errors import EmptyLosses, InputError
from scoretab.spl import (
    SplConfig,
    SplState,
    advance_schedule,
    optimal_v,
    quantile,
    regularizer_value,
)


class TestQuantile:
    def test_four_point_cdf(self):
        losses = [1.0, 2.0, 3.0, 4.0]
        assert quantile(losses, 0.25) == 1.0
        assert quantile(losses, 0.5) == 2.0
        assert quantile(losses, 1.0) == 4.0

    def test_small_p_gives_min(self):
        losses = [5.0, 1.0, 3.0]
        for p in [0.0, 0.1, 1.0 / 3.0]:
            assert quantile(losses, p) == 1.0

    def test_duplicates(self):
        for p in [0.0, 0.3, 0.7, 1.0]:
            assert quantile([2.0, 2.0, 2.0], p) == 2.0

    def test_matches_bruteforce_cdf(self):
        rng = np.random.default_rng(0)
        losses = rng.normal(size=37)
        ordered = np.sort(losses)
        n = losses.size
        for p in rng.uniform(0, 1, size=50):
            # brute-force inf{l : p <= F(l)} over the observed values
            cdf = np.arange(1, n + 1) / n
            want = ordered[np.argmax(cdf >= p - 1e-12)]
            assert quantile(losses, p) == pytest.approx(want)

    def test_empty(self):
        with pytest.raises(EmptyLosses):
            quantile([], 0.5)


class TestOptimalV:
    def test_below_alpha(self):
        assert optimal_v(0.5, 1.0, 3.0) == 1.0

    def test_above_beta(self):
        assert optimal_v(3.5, 1.0, 3.0) == 0.0

    def test_midpoint_ramp(self):
        assert optimal_v(2.0, 1.0, 3.0) == pytest.approx(0.5)

    def test_degenerate_interval(self):
        assert optimal_v(1.0, 2.0, 2.0) == 1.0
        assert optimal_v(2.0, 2.0, 2.0) == 1.0
        assert optimal_v(2.5, 2.0, 2.0) == 0.0

    def test_vectorized(self):
        v = optimal_v(np.array([0.5, 2.0, 3.5]), 1.0, 3.0)
        np.testing.assert_allclose(v, [1.0, 0.5, 0.0])

    def test_invalid_interval(self):
        with pytest.raises(InputError):
            optimal_v(1.0, 3.0, 1.0)

    def test_range(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            qa, qb = np.sort(rng.normal(size=2))
            v = optimal_v(rng.normal(size=16), float(qa), float(qb))
            assert np.all(v >= 0.0) and np.all(v <= 1.0)


class TestRegularizer:
    def test_zero_weights(self):
        assert regularizer_value(np.zeros(5), 1.0, 3.0) == 0.0

    def test_hand_value(self):
        # single v=1: -(1-3)/2 - 3 = -2
        assert regularizer_value(np.array([1.0]), 1.0, 3.0) == pytest.approx(-2.0)

    def test_bruteforce_optimality(self):
        """optimal_v minimizes v*l + r(v) over a 101-point grid on [0, 1]."""
        rng = np.random.default_rng(42)
        grid = np.linspace(0.0, 1.0, 101)
        for _ in range(100):
            l = float(rng.uniform(0, 5))
            qa, qb = np.sort(rng.uniform(0, 5, size=2))
            objective = grid * l + np.array([regularizer_value(np.array([v]), qa, qb) for v in grid])
            best = grid[np.argmin(objective)]
            assert abs(optimal_v(l, float(qa), float(qb)) - best) <= 0.01 + 1e-12


class TestSchedule:
    def test_start_values(self):
        cfg = SplConfig(alpha0=0.25, beta0=0.9, ramp_steps=100)
        assert advance_schedule(cfg, 0) == (0.25, 0.9)

    def test_exact_one_at_ramp_end(self):
        cfg = SplConfig(alpha0=0.0, beta0=0.8, ramp_steps=50)
        alpha, beta = advance_schedule(cfg, 50)
        assert alpha == 1.0 and beta == 1.0

    def test_clamp_before_end(self):
        # alpha0=0.25 at c=S: raw value 0.25 + ln(1 + (e-1)*0.75) = 1.07799,
        # clamped to 1 (computed independently with a calculator)
        cfg = SplConfig(alpha0=0.25, beta0=0.95, ramp_steps=1000)
        raw = 0.25 + math.log(1 + (math.e - 1) * 0.75)
        assert raw == pytest.approx(1.0779889392, abs=1e-9)
        alpha, _ = advance_schedule(cfg, 1000)
        assert alpha == 1.0

    def test_monotone_and_ordered_on_grid(self):
        """Both thresholds nondecreasing, alpha <= beta, on all 9 grid pairs."""
        steps = np.unique(np.linspace(0, 1500, 1000, dtype=int))
        for a0 in (0.20, 0.25, 0.30):
            for b0 in (0.80, 0.90, 0.95):
                cfg = SplConfig(alpha0=a0, beta0=b0, ramp_steps=1000)
                pairs = [advance_schedule(cfg, int(c)) for c in steps]
                alphas = np.array([p[0] for p in pairs])
                betas = np.array([p[1] for p in pairs])
                assert np.all(np.diff(alphas) >= 0)
                assert np.all(np.diff(betas) >= 0)
                assert np.all(alphas <= betas + 1e-12)

    def test_inclusion_floor(self):
        """With beta0 >= 0.8 and distinct losses, at least ceil(0.8 N) - 1
        records keep positive weight at step 0."""
        rng = np.random.default_rng(9)
        cfg = SplConfig(alpha0=0.2, beta0=0.8, ramp_steps=100)
        for n in [5, 17, 64, 301]:
            losses = rng.permutation(np.linspace(0.1, 9.0, n))
            qa = quantile(losses, cfg.alpha0)
            qb = quantile(losses, cfg.beta0)
            v = optimal_v(losses, qa, qb)
            assert np.sum(v > 0) >= math.ceil(0.8 * n) - 1

    def test_full_inclusion_at_one(self):
        losses = np.array([0.5, 1.0, 2.0, 2.0, 7.0])
        qa = quantile(losses, 1.0)
        qb = quantile(losses, 1.0)
        v = optimal_v(losses, qa, qb)
        np.testing.assert_array_equal(v, np.ones(5))

    def test_initial_state(self):
        cfg = SplConfig(alpha0=0.3, beta0=0.9, ramp_steps=10)
        st = SplState.initial(cfg, 7)
        assert st.step == 0
        assert st.alpha == 0.3 and st.beta == 0.9
        np.testing.assert_array_equal(st.v, np.ones(7))

    def test_invalid_config(self):
        with pytest.raises(InputError):
            SplConfig(alpha0=0.9, beta0=0.3)
