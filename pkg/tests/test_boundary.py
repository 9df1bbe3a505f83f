"""Backward-induction boundary solver for both models."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from lastzero.boundary import BoundaryGrid, solve_boundary_brownian, solve_boundary_jump
from lastzero.errors import DomainError
from lastzero.gain import GainContext, h
from lastzero.kernels import K1_mc_direct, K2_mc_direct, McKernelTable
from lastzero.models import LevyModel

THETA = math.log(2.0) / 10.0


@pytest.fixture(scope="module")
def bm():
    return GainContext.create(LevyModel.brownian(2.0, 1.0), THETA)


@pytest.fixture(scope="module")
def jd():
    return GainContext.create(LevyModel.jump_diffusion(3.0, 1.0, 1.0, 1.0),
                              THETA)


@pytest.fixture(scope="module")
def bm_grid(bm):
    return solve_boundary_brownian(bm, 80)


@pytest.fixture(scope="module")
def jd_solution(jd):
    n = 24
    table = McKernelTable.create(jd.model, n, jd.m_theta / n, n_paths=40_000,
                                 seed=1)
    return table, solve_boundary_jump(jd, table, n, h0=0.05)


class TestBrownianSolve:
    def test_shape_properties(self, bm, bm_grid):
        g = bm_grid
        assert g.n == 80 and g.b.shape == (80,)
        assert np.all(np.diff(g.b) <= 2e-12)
        hs = np.array([h(bm, t) for t in g.times])
        assert np.all(g.b >= hs - 1e-12)
        assert np.all(g.b > 0.0)

    def test_residuals_small_on_rooted_steps(self, bm_grid):
        free = ~bm_grid.clamped
        assert np.any(free)
        assert float(np.max(bm_grid.residuals[free])) < 1e-8

    def test_solution_satisfies_independent_kernel_sum(self, bm, bm_grid):
        # independent oracle: re-evaluate the step equation with a from-scratch
        # norm.cdf transcription of the kernel; the solved b_k must be a
        # root of it.
        mu, sig = 2.0, 1.0
        c = math.sqrt(mu**2 + 2.0 * sig**2 * THETA)
        rate = (c + mu) / sig**2

        def kernel(t, x, s, b):
            sd = sig * math.sqrt(s)
            return (norm.cdf(b - x, mu * s, sd)
                    - 2.0 * math.exp(-THETA * (s + t))
                    * norm.cdf(-x, mu * s, sd)
                    - 2.0 * math.exp(-THETA * t) * math.exp(-rate * x)
                    * (norm.cdf(b - x, -s * c, sd)
                       - norm.cdf(-x, -s * c, sd)))

        g = bm_grid
        for k in (0, 20, 50):
            total = sum(kernel(g.times[k], g.b[k], (j + 1) * g.h_step,
                               g.b[k + j])
                        for j in range(g.n - k))
            assert abs(total) * g.h_step < 1e-8

    def test_refinement_consistency(self, bm, bm_grid):
        fine = solve_boundary_brownian(bm, 160)
        assert float(np.max(np.abs(bm_grid.b - fine.b[::2]))) < 5e-2

    def test_rejects_wrong_model(self, jd):
        with pytest.raises(DomainError):
            solve_boundary_brownian(jd, 16)

    def test_rejects_tiny_n(self, bm):
        with pytest.raises(DomainError):
            solve_boundary_brownian(bm, 1)


class TestJumpSolve:
    def test_shape_properties(self, jd, jd_solution):
        _, g = jd_solution
        assert np.all(np.diff(g.b) <= 2e-12)
        hs = np.array([h(jd, t) for t in g.times])
        assert np.all(g.b >= hs - 1e-12)
        assert g.v is not None and g.certified is not None

    def test_certified_and_low_residuals(self, jd_solution):
        _, g = jd_solution
        assert g.all_certified
        free = ~g.clamped
        assert np.any(free)
        # clamped steps sit on the lower envelope where the equation has no
        # root, so only rooted steps are held to the solver tolerance
        assert float(np.max(g.residuals[free])) < 1e-4
        assert float(np.max(g.residuals)) < 1e-2

    def test_jump_functional_nonpositive_up_to_slack(self, jd_solution):
        _, g = jd_solution
        assert np.all(g.v <= 0.02)
        assert np.all(g.v >= -2.0)

    def test_solution_satisfies_direct_kernel_route(self, jd, jd_solution):
        # The solver uses the windowed kernel evaluation; re-check both step
        # equations per k via the independent full-pass evaluation.
        table, g = jd_solution
        for k in (0, 10, 20):
            for x in (g.b[k], g.b[k] + 0.05):
                total = 0.0
                for j in range(g.n - k):
                    i = k + j
                    k1, _ = K1_mc_direct(table, jd, g.times[k], x, j, g.b[i])
                    k2, _ = K2_mc_direct(table, jd, g.times[k], x, j, g.b[i])
                    total += k1 - g.v[i] * k2
                assert abs(total) < 5e-4

    def test_table_grid_mismatch_rejected(self, jd):
        table = McKernelTable.create(jd.model, 8, 1.0, n_paths=2000, seed=0)
        with pytest.raises(DomainError):
            solve_boundary_jump(jd, table, 12)

    def test_estimate_se_produces_finite_bands(self, jd):
        n = 8
        table = McKernelTable.create(jd.model, n, jd.m_theta / n,
                                     n_paths=20_000, seed=5)
        g = solve_boundary_jump(jd, table, n, estimate_se=True)
        assert g.b_se is not None
        assert np.all(np.isfinite(g.b_se))
        assert np.all(g.b_se > 0.0)


class TestBoundaryGrid:
    def test_step_lookup(self, bm_grid):
        g = bm_grid
        assert g.b_at(0.0) == g.b[0]
        assert g.b_at(g.h_step * 1.5) == g.b[1]
        assert g.b_at(g.m_theta) == -math.inf
        assert g.b_at(g.m_theta + 3.0) == -math.inf

    def test_csv_round_trip(self, tmp_path, bm_grid):
        path = tmp_path / "boundary.csv"
        bm_grid.to_csv(path, ["comment line"])
        back = BoundaryGrid.from_csv(path)
        assert back.n == bm_grid.n
        np.testing.assert_allclose(back.b, bm_grid.b, rtol=1e-11)
        np.testing.assert_allclose(back.times, bm_grid.times, rtol=1e-11)

    def test_csv_round_trip_jump_columns(self, tmp_path, jd_solution):
        _, g = jd_solution
        path = tmp_path / "boundary.csv"
        g.to_csv(path)
        back = BoundaryGrid.from_csv(path)
        np.testing.assert_allclose(back.v, g.v, rtol=1e-11)
        assert np.array_equal(back.certified, g.certified)
