"""Value-function evaluation from a solved boundary, and assembly of the
optimal prediction value V(0,0) + E[g]."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundaryGrid, _k_brownian_sum
from .errors import DomainError
from .gain import GainContext
from .kernels import K1_mc, K2_mc, McKernelTable
from .models import Kind, LevyModel


@dataclass
class ValueGrid:
    """Piecewise-constant-in-t approximation V(t_k, x) on a rectangular grid.

    ``values[a, j]`` holds the value at time ``ts[a]`` and level ``xs[j]``.
    """

    theta: float
    m_theta: float
    t_indices: np.ndarray
    ts: np.ndarray
    xs: np.ndarray
    values: np.ndarray
    boundary: BoundaryGrid = field(repr=False)
    flagged: list = field(default_factory=list)

    def value_at_origin(self) -> float:
        ia = np.nonzero(self.t_indices == 0)[0]
        ij = np.nonzero(np.isclose(self.xs, 0.0))[0]
        if not ia.size or not ij.size:
            raise DomainError("grid does not contain the point (0, 0)")
        return float(self.values[ia[0], ij[0]])

    def to_csv(self, path, provenance_lines: list[str] | None = None,
               gnuplot_blocks: bool = False) -> None:
        with open(path, "w") as fh:
            for line in provenance_lines or []:
                fh.write(f"# {line}\n")
            if gnuplot_blocks:
                for a, t in enumerate(self.ts):
                    for j, x in enumerate(self.xs):
                        fh.write(f"{t:.12g} {x:.12g} "
                                 f"{self.values[a, j]:.12g}\n")
                    fh.write("\n")
            else:
                fh.write("t,x,value\n")
                for a, t in enumerate(self.ts):
                    for j, x in enumerate(self.xs):
                        fh.write(f"{t:.12g},{x:.12g},"
                                 f"{self.values[a, j]:.12g}\n")


def default_x_grid(ctx: GainContext, boundary: BoundaryGrid,
                   n_points: int = 200) -> np.ndarray:
    """x grid from -2 / (decay rate of 1 - F) up to b_0 + 1, with 0 included."""
    decay = -float(ctx.scale.roots[1])
    lo = -2.0 / decay if decay > 0 else -2.0
    hi = float(boundary.b[0]) + 1.0
    xs = np.linspace(lo, hi, n_points)
    if not np.any(np.isclose(xs, 0.0)):
        xs = np.sort(np.append(xs, 0.0))
    return xs


def value_brownian(ctx: GainContext, boundary: BoundaryGrid,
                   xs: np.ndarray, t_indices: np.ndarray | None = None) -> ValueGrid:
    """Riemann-sum value matrix with the closed-form kernel.

    Values at and above the boundary are forced to zero (stopping region);
    everything else is the left-endpoint sum of kernel terms.
    """
    if ctx.model.kind != Kind.BROWNIAN:
        raise DomainError("value_brownian requires the Brownian model")
    n = boundary.n
    if t_indices is None:
        t_indices = np.arange(n + 1)
    t_indices = np.asarray(t_indices, dtype=int)
    xs = np.asarray(xs, dtype=float)
    h_step = boundary.h_step
    values = np.zeros((t_indices.size, xs.size))
    for a, k in enumerate(t_indices):
        if k >= n:
            continue  # V = 0 on [m_theta, inf)
        t_k = boundary.times[k]
        s = (np.arange(1, n - k + 1)) * h_step
        targets = boundary.b[k:]
        row = np.zeros(xs.size)
        for j, x in enumerate(xs):
            if x >= boundary.b[k]:
                continue
            row[j] = float(np.sum(_k_brownian_sum(ctx, t_k, float(x), s,
                                                  targets))) * h_step
        values[a] = row
    grid = ValueGrid(theta=ctx.theta, m_theta=ctx.m_theta,
                     t_indices=t_indices,
                     ts=t_indices * h_step, xs=xs, values=values,
                     boundary=boundary)
    _flag_invariants(grid, slack=1e-6)
    return grid


def value_jump(ctx: GainContext, boundary: BoundaryGrid,
               table: McKernelTable, xs: np.ndarray,
               t_indices: np.ndarray | None = None) -> ValueGrid:
    """Riemann-sum value matrix with the Monte Carlo kernels and the solved
    jump-functional sequence."""
    if ctx.model.kind != Kind.JUMP_DIFFUSION:
        raise DomainError("value_jump requires the jump model")
    if boundary.v is None:
        raise DomainError("boundary grid lacks the jump-functional values")
    n = boundary.n
    if t_indices is None:
        t_indices = np.arange(n + 1)
    t_indices = np.asarray(t_indices, dtype=int)
    xs = np.asarray(xs, dtype=float)
    h_step = boundary.h_step
    values = np.zeros((t_indices.size, xs.size))
    for a, k in enumerate(t_indices):
        if k >= n:
            continue
        t_k = boundary.times[k]
        for j, x in enumerate(xs):
            if x >= boundary.b[k]:
                continue
            total = 0.0
            for i in range(k, n):
                total += (K1_mc(table, ctx, t_k, float(x), i - k, boundary.b[i])
                          - boundary.v[i]
                          * K2_mc(table, ctx, t_k, float(x), i - k, boundary.b[i]))
            values[a, j] = total * h_step
    grid = ValueGrid(theta=ctx.theta, m_theta=ctx.m_theta,
                     t_indices=t_indices,
                     ts=t_indices * h_step, xs=xs, values=values,
                     boundary=boundary)
    mc_slack = 3.0 / math.sqrt(table.n_paths)
    _flag_invariants(grid, slack=mc_slack)
    return grid


def value_point(ctx: GainContext, boundary: BoundaryGrid, k: int, x: float,
                table: McKernelTable | None = None) -> float:
    """Raw Riemann sum at (t_k, x) without the stopping-region override;
    at x = b_k its magnitude is bounded by the step-equation residual."""
    n = boundary.n
    if k >= n:
        return 0.0
    t_k = boundary.times[k]
    h_step = boundary.h_step
    if ctx.model.kind == Kind.BROWNIAN:
        s = np.arange(1, n - k + 1) * h_step
        targets = boundary.b[k:]
        return float(np.sum(_k_brownian_sum(ctx, t_k, float(x), s,
                                            targets))) * h_step
    if table is None:
        raise DomainError("jump model needs a kernel table")
    total = 0.0
    for i in range(k, n):
        total += (K1_mc(table, ctx, t_k, float(x), i - k, boundary.b[i])
                  - boundary.v[i]
                  * K2_mc(table, ctx, t_k, float(x), i - k, boundary.b[i]))
    return total * h_step


def _flag_invariants(grid: ValueGrid, slack: float) -> None:
    """Record (not raise) violations of the sign and range invariants."""
    v = grid.values
    if np.max(v) > slack:
        grid.flagged.append(f"positive value {np.max(v)} beyond slack {slack}")
    if np.min(v) <= -grid.m_theta:
        grid.flagged.append(f"value {np.min(v)} at or below -m_theta")


def expected_g(model: LevyModel, theta: float, sim_cfg=None,
               **sim_kwargs) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of E[g], the last time
    at or below zero before the exponential horizon."""
    from .simulator import SimConfig, evaluate_rules, zero_rule
    if sim_cfg is None:
        sim_cfg = SimConfig(model=model, theta=theta, **sim_kwargs)
    report = evaluate_rules(sim_cfg, [zero_rule()])
    return report.means[0], report.ses[0]


def optimal_prediction_value(value_grid: ValueGrid,
                             expected_g_result: tuple[float, float]
                             ) -> tuple[float, float]:
    """V(0, 0) + E[g] with the Monte Carlo error bar of the E[g] term."""
    eg, se = expected_g_result
    return value_grid.value_at_origin() + eg, se
