"""Time-step expectation kernels used by the backward induction.

Brownian model: the kernel

    K(t, x, s, b) = E[ G(s + t, X_s + x) 1{X_s + x <= b} ]

has a closed form in terms of normal distribution functions.

Jump-diffusion model: the analogous kernels

    K1(t, x, s, b) = E[ G(s + t, X_s + x) 1{X_s + x < b} ]
    K2(t, x, s, b) = E[ exp(-rho (X_s + x - b)) 1{X_s + x > b} ]

are estimated by Monte Carlo over exact samples of the marginal X_s.  The
samples at each lookahead are drawn once, sorted, and reused for every
(x, b) query (common random numbers), so kernel values are smooth in b and
each query costs O(log n_paths + window), where the window is the slice of
samples falling in [ -x, b - x ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import DomainError
from .gain import GainContext
from .models import Kind, LevyModel
from .scale import F_theta, brownian_inf_rate


def K_brownian(ctx: GainContext, t: float, x, s: float, b):
    """Closed-form kernel for the Brownian model; broadcasts over x and b."""
    model = ctx.model
    if model.kind != Kind.BROWNIAN:
        raise DomainError("K_brownian requires the Brownian model")
    theta = ctx.theta
    mu, sig = model.mu, model.sigma
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    sd = sig * math.sqrt(s)
    c = math.sqrt(mu * mu + 2.0 * sig**2 * theta)
    rate = brownian_inf_rate(model, theta)

    def ncdf(v, mean):
        return ndtr((v - mean) / sd)

    term1 = ncdf(b - x, mu * s)
    term2 = 2.0 * math.exp(-theta * (s + t)) * ncdf(-x, mu * s)
    term3 = (2.0 * math.exp(-theta * t) * np.exp(-rate * x)
             * (ncdf(b - x, -s * c) - ncdf(-x, -s * c)))
    out = term1 - term2 - term3
    return out if out.ndim else float(out)


def simulate_increment(model: LevyModel, s: float, rng: np.random.Generator,
                       size: int) -> np.ndarray:
    """Exact samples of the marginal X_s (no discretization bias)."""
    if s <= 0.0:
        raise DomainError("s must be positive")
    z = rng.standard_normal(size)
    out = model.mu * s + model.sigma * math.sqrt(s) * z
    if model.kind == Kind.JUMP_DIFFUSION:
        n_jumps = rng.poisson(model.lam * s, size)
        out -= rng.standard_gamma(n_jumps) / model.rho
    return out


@dataclass
class McKernelTable:
    """Cached, sorted marginal samples at the grid lookaheads i*h_step,
    i = 1..n, plus suffix sums of exp(-rho X) for the overshoot kernel."""

    model: LevyModel
    seed: int
    n_paths: int
    h_step: float
    n: int
    sorted_incr: np.ndarray = field(repr=False)   # (n, n_paths), each row sorted
    suffix_exp: np.ndarray = field(repr=False)    # (n, n_paths + 1)

    @staticmethod
    def create(model: LevyModel, n: int, h_step: float, n_paths: int = 200_000,
               seed: int = 0) -> "McKernelTable":
        if model.kind != Kind.JUMP_DIFFUSION:
            raise DomainError("kernel tables are only used for the jump model")
        rng = np.random.default_rng(seed)
        sorted_incr = np.empty((n, n_paths))
        suffix_exp = np.empty((n, n_paths + 1))
        for i in range(n):
            s = (i + 1) * h_step
            incr = np.sort(simulate_increment(model, s, rng, n_paths))
            sorted_incr[i] = incr
            suffix_exp[i, -1] = 0.0
            suffix_exp[i, :-1] = np.cumsum(np.exp(-model.rho * incr)[::-1])[::-1]
        return McKernelTable(model=model, seed=seed, n_paths=n_paths,
                             h_step=h_step, n=n, sorted_incr=sorted_incr,
                             suffix_exp=suffix_exp)

    def lookahead(self, i: int) -> float:
        """Lookahead time of row i (0-based): (i + 1) * h_step."""
        return (i + 1) * self.h_step


def K1_mc(table: McKernelTable, ctx: GainContext, t: float, x: float,
          i: int, b: float) -> float:
    """Monte Carlo mean of G(s + t, X_s + x) 1{X_s + x < b} at lookahead
    index i, deterministic for a fixed table."""
    s = table.lookahead(i)
    arr = table.sorted_incr[i]
    npaths = table.n_paths
    disc = math.exp(-ctx.theta * (s + t))
    idx_b = np.searchsorted(arr, b - x, side="left")
    idx_0 = np.searchsorted(arr, -x, side="left")
    n_neg = min(idx_0, idx_b)
    total = n_neg * (1.0 - 2.0 * disc)
    if idx_b > n_neg:
        window = arr[n_neg:idx_b] + x
        f = F_theta(ctx.scale, window)
        total += float(np.sum(1.0 + 2.0 * disc * (f - 1.0)))
    return total / npaths


def K2_mc(table: McKernelTable, ctx: GainContext, t: float, x: float,
          i: int, b: float) -> float:
    """Monte Carlo mean of exp(-rho (X_s + x - b)) 1{X_s + x > b}."""
    arr = table.sorted_incr[i]
    rho = table.model.rho
    idx = np.searchsorted(arr, b - x, side="right")
    return math.exp(-rho * (x - b)) * table.suffix_exp[i, idx] / table.n_paths


def K1_mc_direct(table: McKernelTable, ctx: GainContext, t: float, x: float,
                 i: int, b: float) -> tuple[float, float]:
    """Full-pass evaluation of K1 with its standard error (O(n_paths))."""
    s = table.lookahead(i)
    y = table.sorted_incr[i] + x
    disc = math.exp(-ctx.theta * (s + t))
    vals = np.where(y < b, 1.0 + 2.0 * disc * (F_theta(ctx.scale, y) - 1.0), 0.0)
    return _mean_se(vals)


def K2_mc_direct(table: McKernelTable, ctx: GainContext, t: float, x: float,
                 i: int, b: float) -> tuple[float, float]:
    """Full-pass evaluation of K2 with its standard error (O(n_paths))."""
    y = table.sorted_incr[i] + x
    rho = table.model.rho
    vals = np.where(y > b, np.exp(-rho * np.maximum(y - b, 0.0)), 0.0)
    return _mean_se(vals)


def _mean_se(vals: np.ndarray) -> tuple[float, float]:
    n = vals.size
    mean = float(np.mean(vals))
    var = float(np.var(vals, ddof=1))
    return mean, math.sqrt(var / n)
