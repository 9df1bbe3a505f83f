"""Gain function of the equivalent optimal stopping problem, its zero-level
curve in x, and the time at which the stopping boundary is killed."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, UnsupportedModelError
from .models import Kind, LevyModel, Variation, variation_class
from .scale import F_theta, ScaleContext, brownian_inf_rate

#: bisection tolerance on x for the zero-level curve
H_XTOL = 1e-10


@dataclass(frozen=True)
class GainContext:
    scale: ScaleContext
    theta: float
    m_theta: float

    @staticmethod
    def create(model: LevyModel, theta: float) -> "GainContext":
        if theta <= 0.0:
            raise DomainError("theta must be strictly positive")
        ctx = ScaleContext.create(model, theta)
        return GainContext(scale=ctx, theta=theta,
                           m_theta=math.log(2.0) / theta)

    @property
    def model(self) -> LevyModel:
        return self.scale.model


def G(ctx: GainContext, t, x):
    """Gain integrand 1 + 2 exp(-theta t) (F(x) - 1); vectorized."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise DomainError("t must be nonnegative")
    out = 1.0 + 2.0 * np.exp(-ctx.theta * t) * (F_theta(ctx.scale, x) - 1.0)
    return out if out.ndim else float(out)


def h(ctx: GainContext, t: float) -> float:
    """Zero-level curve of the gain in x: the smallest x with
    F(x) >= 1 - exp(theta t)/2.  Defined for 0 <= t < m_theta."""
    if not 0.0 <= t < ctx.m_theta:
        raise DomainError(
            f"h is only defined on [0, m_theta); got t={t}, "
            f"m_theta={ctx.m_theta}")
    p = 1.0 - 0.5 * math.exp(ctx.theta * t)
    if ctx.model.kind == Kind.BROWNIAN:
        rate = brownian_inf_rate(ctx.model, ctx.theta)
        return -math.log1p(-p) / rate
    if p <= 0.0:
        return 0.0
    hi = 1.0
    while F_theta(ctx.scale, hi) < p:
        hi *= 2.0
        if hi > 1e8:
            raise DomainError("failed to bracket the zero-level curve")
    return brentq(lambda x: F_theta(ctx.scale, x) - p, 0.0, hi,
                  xtol=H_XTOL, maxiter=200)


def t_b(ctx: GainContext) -> float:
    """First time the boundary hits zero; equals m_theta for the
    infinite-variation models supported here."""
    if variation_class(ctx.model) == Variation.INFINITE:
        return ctx.m_theta
    # The finite-variation branch needs the expected first-passage
    # functional of the jump measure; no finite-variation model is
    # constructible in this package, so it stays unimplemented.
    raise UnsupportedModelError(
        "boundary kill time for finite-variation models is not supported")
