"""Time-step expectation kernels: closed-form Brownian kernel and the
Monte Carlo kernel tables for the jump model."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from lastzero.gain import G, GainContext
from lastzero.kernels import (K1_mc, K1_mc_direct, K2_mc, K2_mc_direct,
                              K_brownian, McKernelTable, simulate_increment)
from lastzero.models import LevyModel
from lastzero.scale import F_theta

THETA = math.log(2.0) / 10.0


@pytest.fixture(scope="module")
def bm():
    return GainContext.create(LevyModel.brownian(2.0, 1.0), THETA)


@pytest.fixture(scope="module")
def jd():
    return GainContext.create(LevyModel.jump_diffusion(3.0, 1.0, 1.0, 1.0),
                              THETA)


@pytest.fixture(scope="module")
def table(jd):
    return McKernelTable.create(jd.model, n=8, h_step=10.0 / 8,
                                n_paths=60_000, seed=3)


class TestBrownianKernel:
    def test_against_mc_oracle(self, bm):
        # independent oracle: brute-force Monte Carlo of E[G(s+t, X_s + x) 1{<= b}]
        # using raw normal draws; agreement within 5 standard errors.
        rng = np.random.default_rng(42)
        t, x, s, b = 1.5, 0.2, 0.8, 0.45
        xs = x + 2.0 * s + math.sqrt(s) * rng.standard_normal(400_000)
        vals = np.where(xs <= b, G(bm, s + t, xs), 0.0)
        mc = float(np.mean(vals))
        se = float(np.std(vals, ddof=1)) / math.sqrt(xs.size)
        assert K_brownian(bm, t, x, s, b) == pytest.approx(mc, abs=5 * se)

    def test_independent_formula(self, bm):
        # independent oracle: direct norm.cdf transcription of the closed form,
        # written separately from the library's ndtr-based version
        mu, sig = 2.0, 1.0
        c = math.sqrt(mu**2 + 2.0 * sig**2 * THETA)
        rate = (c + mu) / sig**2
        for (t, x, s, b) in [(0.0, 0.0, 0.5, 0.4), (2.0, 0.3, 1.3, 0.35),
                             (8.0, -1.0, 0.05, 0.1)]:
            sd = sig * math.sqrt(s)
            expected = (norm.cdf(b - x, mu * s, sd)
                        - 2.0 * math.exp(-THETA * (s + t))
                        * norm.cdf(-x, mu * s, sd)
                        - 2.0 * math.exp(-THETA * t) * math.exp(-rate * x)
                        * (norm.cdf(b - x, -s * c, sd)
                           - norm.cdf(-x, -s * c, sd)))
            assert K_brownian(bm, t, x, s, b) == pytest.approx(expected,
                                                               abs=1e-12)

    def test_broadcasts(self, bm):
        out = K_brownian(bm, 1.0, np.zeros(3), 0.5, np.array([0.2, 0.4, 0.6]))
        assert out.shape == (3,)

    def test_limit_large_b(self, bm):
        # b -> inf keeps the whole mass: E[G(s+t, X_s + x)]
        t, x, s = 1.0, 0.1, 0.7
        wide = K_brownian(bm, t, x, s, 60.0)
        rng = np.random.default_rng(5)
        xs = x + 2.0 * s + math.sqrt(s) * rng.standard_normal(200_000)
        assert wide == pytest.approx(float(np.mean(G(bm, s + t, xs))),
                                     abs=5e-3)


class TestIncrements:
    def test_moment_identities(self):
        # sample mean and variance of X_s must match psi'(0) s and
        # psi''(0) s within 4 standard errors
        rng = np.random.default_rng(0)
        size = 200_000
        for m in (LevyModel.brownian(2.0, 1.0),
                  LevyModel.jump_diffusion(3.0, 1.0, 1.0, 1.0)):
            for s in (0.3, 2.0):
                xs = simulate_increment(m, s, rng, size)
                se_mean = float(np.std(xs, ddof=1)) / math.sqrt(size)
                assert float(np.mean(xs)) == pytest.approx(
                    m.mean_rate() * s, abs=4 * se_mean)
                var = float(np.var(xs, ddof=1))
                se_var = var * math.sqrt(2.0 / size)
                assert var == pytest.approx(m.variance_rate() * s,
                                            abs=5 * se_var)

    def test_deterministic_given_seed(self):
        m = LevyModel.jump_diffusion(3.0, 1.0, 1.0, 1.0)
        a = simulate_increment(m, 1.0, np.random.default_rng(9), 1000)
        b = simulate_increment(m, 1.0, np.random.default_rng(9), 1000)
        np.testing.assert_array_equal(a, b)


class TestMcKernels:
    def test_table_rows_sorted(self, table):
        for i in range(table.n):
            assert np.all(np.diff(table.sorted_incr[i]) >= 0.0)

    def test_lookahead_times(self, table):
        assert table.lookahead(0) == pytest.approx(1.25)
        assert table.lookahead(7) == pytest.approx(10.0)

    def test_k1_sorted_equals_direct(self, jd, table):
        # The windowed evaluation and the full-pass evaluation run over the
        # same samples and must agree to rounding.
        for (t, x, i, b) in [(0.0, 0.3, 0, 0.9), (2.5, 0.8, 3, 0.6),
                             (5.0, -0.4, 6, 0.2)]:
            direct, _ = K1_mc_direct(table, jd, t, x, i, b)
            assert K1_mc(table, jd, t, x, i, b) == pytest.approx(direct,
                                                                 abs=1e-11)

    def test_k2_sorted_equals_direct(self, jd, table):
        for (t, x, i, b) in [(0.0, 0.3, 0, 0.9), (2.5, 0.8, 3, 0.6),
                             (5.0, -0.4, 6, 0.2)]:
            direct, _ = K2_mc_direct(table, jd, t, x, i, b)
            assert K2_mc(table, jd, t, x, i, b) == pytest.approx(direct,
                                                                 abs=1e-11)

    def test_k2_bounds(self, jd, table):
        # every summand exp(-rho (X + x - b)) 1{X + x > b} lies in (0, 1],
        # so K2 is bounded by the exceedance fraction
        arr = table.sorted_incr[2]
        for b in np.linspace(-1.0, 3.0, 30):
            v = K2_mc(table, jd, 1.0, 0.0, 2, b)
            frac = float(np.mean(arr > b))
            assert 0.0 <= v <= frac + 1e-12

    def test_k2_vanishes_for_huge_barrier(self, jd, table):
        assert K2_mc(table, jd, 1.0, 0.0, 2, 80.0) == 0.0

    def test_table_deterministic(self, jd):
        t1 = McKernelTable.create(jd.model, n=3, h_step=0.5, n_paths=5000,
                                  seed=12)
        t2 = McKernelTable.create(jd.model, n=3, h_step=0.5, n_paths=5000,
                                  seed=12)
        np.testing.assert_array_equal(t1.sorted_incr, t2.sorted_incr)
        np.testing.assert_array_equal(t1.suffix_exp, t2.suffix_exp)

    def test_near_brownian_limit_matches_closed_form(self, bm):
        # independent oracle: lam -> 0 degeneracy: with a vanishing jump rate the
        # K1 kernel is the Brownian kernel up to MC error.
        near = LevyModel.jump_diffusion(2.0, 1.0, 1e-12, 1.0)
        ctx = GainContext.create(near, THETA)
        tab = McKernelTable.create(near, n=4, h_step=0.5, n_paths=120_000,
                                   seed=21)
        for (t, x, i, b) in [(0.0, 0.1, 0, 0.45), (3.0, 0.3, 3, 0.35)]:
            mc, se = K1_mc_direct(tab, ctx, t, x, i, b)
            closed = K_brownian(bm, t, x, tab.lookahead(i), b)
            assert mc == pytest.approx(closed, abs=5 * max(se, 1e-6))
