"""Closed-form scale functions and the distribution of the negated running
infimum at an independent exponential time.

For both supported models 1/(psi(beta) - q) splits into partial fractions
over the real roots r_j of psi(beta) = q, so

    W_q(x) = sum_j exp(r_j x) / psi'(r_j)          (x >= 0)
    Z_q(x) = 1 + q sum_j (exp(r_j x) - 1) / (r_j psi'(r_j))

and the distribution function of -inf_{[0, e_q]} X is

    F(x) = (q / phi) W_q(x) - Z_q(x) + 1.

The exp(phi x) terms of (q/phi) W_q and Z_q cancel exactly, so F is
evaluated from decaying exponentials only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvariantError
from .models import (Kind, LevyModel, RootSet, laplace_exponent, phi_inverse,
                     psi_prime, psi_roots)

#: slack allowed before an out-of-range distribution value is an error
F_SLACK = 1e-10


@dataclass(frozen=True)
class ScaleContext:
    """Roots of psi = q and derived coefficients, cached for one (model, q)."""

    model: LevyModel
    q: float
    roots: np.ndarray = field(repr=False)           # [phi, negative roots...]
    dpsi: np.ndarray = field(repr=False)            # psi'(r_j)
    f_coeffs: np.ndarray = field(repr=False)        # coefficients on exp(r_j x), j >= 1
    f_const: float = 0.0                            # limit of F at +infinity

    @staticmethod
    def create(model: LevyModel, q: float) -> "ScaleContext":
        if q <= 0.0:
            raise DomainError("q must be strictly positive")
        if model.kind == Kind.BROWNIAN:
            phi = phi_inverse(model, q)
            mu, s2 = model.mu, model.sigma**2
            xi = (-mu - math.sqrt(mu * mu + 2.0 * s2 * q)) / s2
            roots = np.array([phi, xi])
        else:
            rs: RootSet = psi_roots(model, q)
            roots = rs.as_array()
        dpsi = np.asarray(psi_prime(model, roots), dtype=float)
        if dpsi[0] <= 0.0:
            raise InvariantError("psi'(phi(q)) must be positive")
        phi = roots[0]
        # F(x) = f_const + sum_{j>=1} f_coeffs[j-1] exp(r_j x); the phi term
        # has exactly zero coefficient and is dropped.
        f_coeffs = q * (1.0 / (phi * dpsi[1:]) - 1.0 / (roots[1:] * dpsi[1:]))
        f_const = float(q * np.sum(1.0 / (roots * dpsi)))
        if abs(f_const - 1.0) > 1e-9:
            raise InvariantError(
                f"F(+inf) = {f_const} deviates from 1; wrong roots?")
        return ScaleContext(model=model, q=q, roots=roots, dpsi=dpsi,
                            f_coeffs=f_coeffs, f_const=f_const)


def W(ctx: ScaleContext, x):
    """First scale function; zero on the negative half line."""
    x = np.asarray(x, dtype=float)
    xp = np.where(x >= 0.0, x, 0.0)
    vals = np.exp(np.multiply.outer(xp, ctx.roots)) @ (1.0 / ctx.dpsi)
    out = np.where(x >= 0.0, vals, 0.0)
    return out if out.ndim else float(out)


def Z(ctx: ScaleContext, x):
    """Second scale function Z_q(x) = 1 + q * int_0^x W_q; equals 1 for x <= 0."""
    x = np.asarray(x, dtype=float)
    xp = np.where(x >= 0.0, x, 0.0)
    coeff = 1.0 / (ctx.roots * ctx.dpsi)
    vals = 1.0 + ctx.q * ((np.exp(np.multiply.outer(xp, ctx.roots)) - 1.0) @ coeff)
    out = np.where(x >= 0.0, vals, 1.0)
    return out if out.ndim else float(out)


def F_theta(ctx: ScaleContext, x):
    """Distribution function of the negated running infimum of X at an
    independent Exp(q) time; vectorized in x."""
    x = np.asarray(x, dtype=float)
    xp = np.where(x >= 0.0, x, 0.0)
    vals = ctx.f_const + np.exp(np.multiply.outer(xp, ctx.roots[1:])) @ ctx.f_coeffs
    out = np.where(x >= 0.0, vals, 0.0)
    bad_low = np.min(out) < -F_SLACK
    bad_high = np.max(out) > 1.0 + F_SLACK
    if bad_low or bad_high:
        raise InvariantError(
            f"F value outside [0,1] beyond slack: range "
            f"[{np.min(out)}, {np.max(out)}]")
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def brownian_inf_rate(model: LevyModel, q: float) -> float:
    """Exponential rate of -inf X at e_q for the Brownian model:
    (sqrt(mu^2 + 2 sigma^2 q) + mu) / sigma^2."""
    if model.kind != Kind.BROWNIAN:
        raise DomainError("closed form only valid for the Brownian model")
    mu, s2 = model.mu, model.sigma**2
    return (math.sqrt(mu * mu + 2.0 * s2 * q) + mu) / s2


def F_theta_brownian_closed_form(model: LevyModel, q: float, x):
    """1 - exp(-rate * x) for x >= 0; the known closed form for the
    Brownian-with-drift model."""
    rate = brownian_inf_rate(model, q)
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.0, -np.expm1(-rate * np.where(x >= 0.0, x, 0.0)), 0.0)
    return out if out.ndim else float(out)
