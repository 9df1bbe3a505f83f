"""Spectrally negative Levy models and their analytic primitives.

Two concrete models are supported:

* ``BrownianWithDrift``: X_t = mu*t + sigma*B_t
* ``JumpDiffusion``:     X_t = sigma*B_t + mu*t - sum_{i<=N_t} Y_i,
  with N a Poisson process of rate ``lam`` and Y_i ~ Exp(rho).

Both have sigma > 0 and hence paths of infinite variation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericError

#: absolute tolerance on |psi(root) - q| for every root returned
ROOT_TOL = 1e-12
MAX_ROOT_ITER = 200


class Kind(str, enum.Enum):
    BROWNIAN = "brownian"
    JUMP_DIFFUSION = "jump_diffusion"


class Variation(str, enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"


@dataclass(frozen=True)
class LevyModel:
    """Immutable parameter set of a supported model.

    ``lam`` and ``rho`` must be present exactly when ``kind`` is
    ``JUMP_DIFFUSION``.
    """

    kind: Kind
    mu: float
    sigma: float
    lam: float | None = None
    rho: float | None = None

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise DomainError("sigma must be strictly positive (monotone or "
                              "finite-variation models are not supported)")
        if self.kind == Kind.JUMP_DIFFUSION:
            if self.lam is None or self.rho is None:
                raise DomainError("jump_diffusion requires lam and rho")
            if self.lam <= 0.0 or self.rho <= 0.0:
                raise DomainError("lam and rho must be strictly positive")
        else:
            if self.lam is not None or self.rho is not None:
                raise DomainError("lam/rho are only valid for jump_diffusion")

    @staticmethod
    def brownian(mu: float, sigma: float) -> "LevyModel":
        return LevyModel(Kind.BROWNIAN, float(mu), float(sigma))

    @staticmethod
    def jump_diffusion(mu: float, sigma: float, lam: float, rho: float) -> "LevyModel":
        return LevyModel(Kind.JUMP_DIFFUSION, float(mu), float(sigma),
                         float(lam), float(rho))

    def mean_rate(self) -> float:
        """E[X_1], i.e. psi'(0+)."""
        if self.kind == Kind.BROWNIAN:
            return self.mu
        return self.mu - self.lam / self.rho

    def variance_rate(self) -> float:
        """Var[X_1]."""
        if self.kind == Kind.BROWNIAN:
            return self.sigma**2
        return self.sigma**2 + 2.0 * self.lam / self.rho**2


@dataclass(frozen=True)
class RootSet:
    """The three real solutions of psi(beta) = q for the jump model,
    ordered zeta2 < -rho < zeta1 < 0 < phi."""

    phi: float
    zeta1: float
    zeta2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.zeta1, self.zeta2])


def laplace_exponent(model: LevyModel, beta):
    """psi(beta) = log E[exp(beta * X_1)], vectorized in beta."""
    beta = np.asarray(beta, dtype=float)
    if model.kind == Kind.BROWNIAN:
        out = model.mu * beta + 0.5 * model.sigma**2 * beta**2
    else:
        denom = model.rho + beta
        if np.any(denom == 0.0):
            raise DomainError("laplace exponent has a pole at beta = -rho")
        out = (0.5 * model.sigma**2 * beta**2 + model.mu * beta
               - model.lam * beta / denom)
    return out if out.ndim else float(out)


def psi_prime(model: LevyModel, beta):
    """First derivative of the Laplace exponent, vectorized in beta."""
    beta = np.asarray(beta, dtype=float)
    if model.kind == Kind.BROWNIAN:
        out = model.mu + model.sigma**2 * beta
    else:
        denom = model.rho + beta
        if np.any(denom == 0.0):
            raise DomainError("psi' has a pole at beta = -rho")
        out = model.sigma**2 * beta + model.mu - model.lam * model.rho / denom**2
    return out if out.ndim else float(out)


def phi_inverse(model: LevyModel, q: float) -> float:
    """Right inverse of psi: the largest theta >= 0 with psi(theta) = q."""
    if q < 0.0:
        raise DomainError("q must be nonnegative")
    if model.kind == Kind.BROWNIAN:
        mu, s2 = model.mu, model.sigma**2
        return (math.sqrt(mu * mu + 2.0 * s2 * q) - mu) / s2
    if q == 0.0 and psi_prime(model, 0.0) >= 0.0:
        return 0.0
    # psi is convex with psi(0) = 0 and psi(inf) = inf; bracket and solve.
    lo = 0.0
    hi = 1.0
    it = 0
    while laplace_exponent(model, hi) <= q:
        hi *= 2.0
        it += 1
        if it > MAX_ROOT_ITER:
            raise NumericError("failed to bracket phi_inverse")
    root = brentq(lambda b: laplace_exponent(model, b) - q, lo, hi,
                  xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=MAX_ROOT_ITER)
    root = _polish(model, root, q)
    if abs(laplace_exponent(model, root) - q) > max(ROOT_TOL, 1e-12 * abs(q)):
        raise NumericError(f"phi_inverse residual too large at q={q}")
    return root


def _polish(model: LevyModel, root: float, q: float) -> float:
    """A few Newton steps on psi(beta) - q."""
    for _ in range(8):
        f = laplace_exponent(model, root) - q
        fp = psi_prime(model, root)
        if fp == 0.0:
            break
        step = f / fp
        root -= step
        if abs(step) < 1e-16 * max(1.0, abs(root)):
            break
    return root


def psi_roots(model: LevyModel, q: float) -> RootSet:
    """All three real roots of psi(beta) = q for the jump-diffusion model.

    Clearing the denominator rho + beta turns psi(beta) = q into the cubic

        s2/2 * b^3 + (mu + s2*rho/2) * b^2 + (mu*rho - lam - q) * b - q*rho = 0.
    """
    if model.kind != Kind.JUMP_DIFFUSION:
        raise DomainError("psi_roots only applies to the jump_diffusion model")
    if q <= 0.0:
        raise DomainError("q must be strictly positive")
    s2, mu, lam, rho = model.sigma**2, model.mu, model.lam, model.rho
    coeffs = np.array([0.5 * s2,
                       mu + 0.5 * s2 * rho,
                       mu * rho - lam - q,
                       -q * rho])
    raw = np.roots(coeffs)  # companion-matrix eigenvalues
    if np.any(np.abs(raw.imag) > 1e-8 * (1.0 + np.abs(raw.real))):
        raise NumericError(f"expected three real roots, got {raw}")
    roots = np.sort(raw.real)
    # Newton polish on the cubic itself (no pole to worry about).
    dcoeffs = np.polyder(coeffs)
    for _ in range(MAX_ROOT_ITER):
        f = np.polyval(coeffs, roots)
        fp = np.polyval(dcoeffs, roots)
        step = f / fp
        roots = roots - step
        if np.all(np.abs(step) < 1e-15 * np.maximum(1.0, np.abs(roots))):
            break
    zeta2, zeta1, phi = roots
    rs = RootSet(phi=float(phi), zeta1=float(zeta1), zeta2=float(zeta2))
    if not (rs.zeta2 < -rho < rs.zeta1 < 0.0 < rs.phi):
        raise NumericError(f"root ordering violated: {rs} (rho={rho})")
    # Validate on the cleared-denominator cubic: the psi form itself is
    # ill-conditioned when zeta1 sits next to the pole at -rho (lam -> 0).
    scale = np.max(np.abs(coeffs)) * np.maximum(1.0, np.abs(roots)) ** 3
    resid = np.abs(np.polyval(coeffs, roots)) / scale
    if np.any(resid > 1e-9):
        raise NumericError(f"cubic residuals too large: {resid}")
    return rs


def variation_class(model: LevyModel) -> Variation:
    """Path-variation class; both supported models have sigma > 0."""
    if model.sigma > 0.0:
        return Variation.INFINITE
    return Variation.FINITE
