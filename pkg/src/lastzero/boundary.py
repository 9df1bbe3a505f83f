"""Backward induction for the stopping boundary on a uniform time grid.

The continuous integral equation

    int_0^{m - t} K(t, b(t), s, b(t + s)) ds = 0

is discretized with the left-endpoint Riemann sum over t_k = k * m / n,
with kernel lookahead t_{i-k+1} paired with boundary value b_i:

    sum_{i=k}^{n-1} K(t_k, b_k, t_{i-k+1}, b_i) * h = 0.

For the jump model each step solves the 2x2 system obtained by also
requiring the value at b_k + h0 to vanish, with the jump functional value
v_k eliminated linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import DomainError, NumericError
from .gain import G, GainContext, h as h_curve
from .kernels import K1_mc, K1_mc_direct, K2_mc, K2_mc_direct, McKernelTable
from .models import Kind

#: absolute tolerance on the boundary level in each step's root find
B_XTOL = 1e-12
#: slack multiplier for the monotonicity invariant
MONO_SLACK = 2.0 * B_XTOL
#: maximum geometric expansions of the root-find upper bracket
MAX_EXPAND = 50
#: default slack on the jump-functional sign bounds before a step is flagged
V_SIGN_SLACK = 0.02


@dataclass
class BoundaryGrid:
    """Solved boundary values b_k on t_k = k * m_theta / n, k = 0..n-1,
    with per-step equation residuals and, for the jump model, the jump
    functional values v_k and certification flags."""

    theta: float
    m_theta: float
    n: int
    h_step: float
    times: np.ndarray                  # (n,), t_k for k = 0..n-1
    b: np.ndarray                      # (n,)
    residuals: np.ndarray              # (n,)
    v: np.ndarray | None = None        # (n,), jump model only
    certified: np.ndarray | None = None  # (n,) bool, jump model only
    clamped: np.ndarray | None = None  # (n,) bool, steps pinned to the zero curve
    b_se: np.ndarray | None = None     # (n,), MC error estimate, jump model
    provenance: dict = field(default_factory=dict)

    @property
    def all_certified(self) -> bool:
        return self.certified is None or bool(np.all(self.certified))

    def b_at(self, t: float) -> float:
        """Step-function boundary: b(t) = b_k on [t_k, t_{k+1})."""
        if t >= self.m_theta:
            return -math.inf
        k = min(int(t / self.h_step), self.n - 1)
        return float(self.b[k])

    def to_csv(self, path, provenance_lines: list[str] | None = None) -> None:
        with open(path, "w") as fh:
            for line in provenance_lines or []:
                fh.write(f"# {line}\n")
            for key, val in sorted(self.provenance.items()):
                fh.write(f"# {key} = {val}\n")
            has_v = self.v is not None
            header = "k,t_k,b_k"
            if has_v:
                header += ",v_k,residual,certified"
            else:
                header += ",residual"
            fh.write(header + "\n")
            for k in range(self.n):
                row = f"{k},{self.times[k]:.12g},{self.b[k]:.12g}"
                if has_v:
                    row += (f",{self.v[k]:.12g},{self.residuals[k]:.12g},"
                            f"{int(self.certified[k])}")
                else:
                    row += f",{self.residuals[k]:.12g}"
                fh.write(row + "\n")

    @staticmethod
    def from_csv(path) -> "BoundaryGrid":
        meta = {}
        rows = []
        header = None
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    if "=" in line:
                        key, _, val = line[1:].partition("=")
                        meta[key.strip()] = val.strip()
                    continue
                if header is None:
                    header = line.split(",")
                    continue
                rows.append(line.split(","))
        if header is None or not rows:
            raise NumericError(f"no boundary data in {path}")
        cols = {name: i for i, name in enumerate(header)}
        n = len(rows)
        times = np.array([float(r[cols["t_k"]]) for r in rows])
        b = np.array([float(r[cols["b_k"]]) for r in rows])
        residuals = np.array([float(r[cols["residual"]]) for r in rows])
        v = cert = None
        if "v_k" in cols:
            v = np.array([float(r[cols["v_k"]]) for r in rows])
            cert = np.array([bool(int(r[cols["certified"]])) for r in rows])
        h_step = times[1] - times[0] if n > 1 else float(meta.get("h_step", 0))
        m_theta = float(meta.get("m_theta", n * h_step))
        theta = float(meta.get("theta", math.log(2.0) / m_theta))
        return BoundaryGrid(theta=theta, m_theta=m_theta, n=n, h_step=h_step,
                            times=times, b=b, residuals=residuals, v=v,
                            certified=cert, provenance=meta)


def _find_root(f, lower: float, upper0: float, step_index: int) -> float:
    """Safeguarded bracketing root find on [lower, expanding upper].

    If f(lower) >= 0 the kernel sum is nonnegative on the whole admissible
    range and the boundary sits on the gain-function zero curve; such steps
    are reported as clamped since the step equation has no root there.
    """
    flo = f(lower)
    if flo >= 0.0:
        return lower, True
    upper = max(upper0, lower + 1e-6)
    fup = f(upper)
    expansions = 0
    while fup <= 0.0:
        expansions += 1
        if expansions > MAX_EXPAND:
            raise NumericError(
                f"bracket expansion failed at step {step_index}: "
                f"f({lower})={flo}, f({upper})={fup}")
        upper = lower + 2.0 * (upper - lower)
        fup = f(upper)
    return brentq(f, lower, upper, xtol=B_XTOL, maxiter=200), False


def _find_sign_change(f, lower: float, step0: float = 1e-3,
                      max_span: float = 8.0):
    """Root find without a monotonicity assumption: walk up from ``lower``
    with doubling gaps until f changes sign, then bisect the bracket.

    The jump-model step function decreases through its root, and the Monte
    Carlo kernels make its shape noisy near the zero curve, so the
    orientation-aware bracketing of `_find_root` does not apply.  Returns
    (root, clamped); clamped steps found no sign change and sit on the
    lower envelope.
    """
    f_prev = f(lower)
    if f_prev == 0.0:
        return lower, False
    x_prev = lower
    gap = step0
    while x_prev < lower + max_span:
        x = x_prev + gap
        fx = f(x)
        if fx == 0.0:
            return x, False
        if (fx > 0.0) != (f_prev > 0.0):
            return brentq(f, x_prev, x, xtol=B_XTOL, maxiter=200), False
        x_prev, f_prev = x, fx
        gap *= 2.0
    return lower, True


def _check_monotone(b: np.ndarray) -> None:
    bad = np.nonzero(np.diff(b) > MONO_SLACK)[0]
    if bad.size:
        raise NumericError(
            f"boundary not nonincreasing beyond slack at steps {bad}")


def solve_boundary_brownian(ctx: GainContext, n: int,
                            provenance: dict | None = None) -> BoundaryGrid:
    """Backward induction with the closed-form Brownian kernel."""
    if ctx.model.kind != Kind.BROWNIAN:
        raise DomainError("solve_boundary_brownian requires the Brownian model")
    if n < 2:
        raise DomainError("n must be at least 2")
    m = ctx.m_theta
    h_step = m / n
    times = np.arange(n) * h_step
    b = np.empty(n)
    residuals = np.empty(n)
    clamped = np.zeros(n, dtype=bool)
    lookaheads = np.arange(1, n + 1) * h_step

    for k in range(n - 1, -1, -1):
        t_k = times[k]
        s = lookaheads[: n - k]
        tail = b[k + 1:]

        def f(bk):
            targets = np.concatenate(([bk], tail))
            return float(np.sum(_k_brownian_sum(ctx, t_k, bk, s, targets)))

        lower = h_curve(ctx, t_k)
        upper0 = (b[k + 1] if k < n - 1 else lower) + 1.0
        b[k], clamped[k] = _find_root(f, lower, upper0, k)
        residuals[k] = abs(f(b[k])) * h_step

    _check_monotone(b)
    grid = BoundaryGrid(theta=ctx.theta, m_theta=m, n=n, h_step=h_step,
                        times=times, b=b, residuals=residuals,
                        clamped=clamped, provenance=dict(provenance or {}))
    return grid


def _k_brownian_sum(ctx: GainContext, t_k: float, x: float,
                    s: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Kernel terms K(t_k, x, s_j, targets_j) for all lookaheads at once."""
    model = ctx.model
    theta = ctx.theta
    mu, sig = model.mu, model.sigma
    sd = sig * np.sqrt(s)
    c = math.sqrt(mu * mu + 2.0 * sig**2 * theta)
    rate = (c + mu) / sig**2
    term1 = ndtr((targets - x - mu * s) / sd)
    term2 = 2.0 * np.exp(-theta * (s + t_k)) * ndtr((-x - mu * s) / sd)
    term3 = (2.0 * math.exp(-theta * t_k) * math.exp(-rate * x)
             * (ndtr((targets - x + s * c) / sd) - ndtr((-x + s * c) / sd)))
    return term1 - term2 - term3


def solve_boundary_jump(ctx: GainContext, table: McKernelTable, n: int,
                        h0: float = 0.05, estimate_se: bool = False,
                        v_sign_slack: float = V_SIGN_SLACK,
                        provenance: dict | None = None) -> BoundaryGrid:
    """Backward induction for the jump model.

    Each step solves, for (b_k, v_k),

        sum_i [K1(t_k, b_k, s_i, b_i)      - v_i K2(t_k, b_k, s_i, b_i)]      = 0
        sum_i [K1(t_k, b_k + h0, s_i, b_i) - v_i K2(t_k, b_k + h0, s_i, b_i)] = 0

    by eliminating v_k (the system is affine in it for fixed b_k) and
    root-finding the second equation in b_k.  The jump functional is
    constrained to [-G(t_k, b_k), 0]: a positive eliminated v_k is
    projected to zero and the step re-solved with the first equation
    alone.  Steps whose v_k still escapes the range beyond
    ``v_sign_slack`` are flagged non-certified.
    """
    if ctx.model.kind != Kind.JUMP_DIFFUSION:
        raise DomainError("solve_boundary_jump requires the jump model")
    if n < 2:
        raise DomainError("n must be at least 2")
    if h0 <= 0.0:
        raise DomainError("h0 must be positive")
    if table.n < n or abs(table.h_step - ctx.m_theta / n) > 1e-12:
        raise DomainError("kernel table grid does not match the requested n")
    m = ctx.m_theta
    h_step = m / n
    times = np.arange(n) * h_step
    b = np.empty(n)
    v = np.empty(n)
    residuals = np.empty(n)
    certified = np.ones(n, dtype=bool)
    clamped = np.zeros(n, dtype=bool)
    b_se = np.zeros(n) if estimate_se else None

    for k in range(n - 1, -1, -1):
        t_k = times[k]
        n_terms = n - k

        def sums(x, bk):
            """(A, B) with equation = A - v_k * B at evaluation level x."""
            a = K1_mc(table, ctx, t_k, x, 0, bk)
            bcoef = K2_mc(table, ctx, t_k, x, 0, bk)
            for j in range(1, n_terms):
                i = k + j
                a += (K1_mc(table, ctx, t_k, x, j, b[i])
                      - v[i] * K2_mc(table, ctx, t_k, x, j, b[i]))
            return a, bcoef

        def g(bk):
            a1, b1 = sums(bk, bk)
            a2, b2 = sums(bk + h0, bk)
            if b1 <= 0.0:
                # overshoot kernel vanished; fall back to the first equation
                return a1
            return a2 - (a1 / b1) * b2

        def g1(bk):
            a, _ = sums(bk, bk)
            return a

        lower = h_curve(ctx, t_k)
        if k < n - 1:
            # the boundary is nonincreasing, so b_{k+1} is a valid floor
            lower = max(lower, b[k + 1])
        b[k], clamped[k] = _find_sign_change(g, lower)
        a1, b1 = sums(b[k], b[k])
        v[k] = a1 / b1 if b1 > 0.0 else 0.0
        solved = g
        if v[k] > 0.0:
            # the jump functional is constrained to [-G, 0]; a positive
            # unconstrained estimate only absorbs discretization error, so
            # project it onto the bound and solve the first equation alone
            v[k] = 0.0
            b[k], clamped[k] = _find_sign_change(g1, lower)
            a1, b1 = sums(b[k], b[k])
            residuals[k] = abs(a1)
            solved = g1
        else:
            a2, b2 = sums(b[k] + h0, b[k])
            residuals[k] = max(abs(a1 - v[k] * b1), abs(a2 - v[k] * b2))

        g_here = G(ctx, t_k, b[k])
        if not (-g_here - v_sign_slack <= v[k] <= v_sign_slack):
            certified[k] = False
        if estimate_se:
            b_se[k] = _step_se(ctx, table, t_k, k, b, v, n_terms, solved, b1)

    _check_monotone(b)
    prov = dict(provenance or {})
    prov.setdefault("h0", h0)
    return BoundaryGrid(theta=ctx.theta, m_theta=m, n=n, h_step=h_step,
                        times=times, b=b, residuals=residuals, v=v,
                        certified=certified, clamped=clamped, b_se=b_se,
                        provenance=prov)


def _step_se(ctx, table, t_k, k, b, v, n_terms, g, b1) -> float:
    """Propagated MC standard error of b_k: SE of the step equation divided
    by its slope in b_k (finite difference)."""
    var = 0.0
    for j in range(n_terms):
        i = k + j
        _, se1 = K1_mc_direct(table, ctx, t_k, b[k], j, b[i] if j else b[k])
        var += se1 * se1
        if j:
            _, se2 = K2_mc_direct(table, ctx, t_k, b[k], j, b[i])
            var += (v[i] * se2) ** 2
    se_g = math.sqrt(var)
    db = max(1e-4, 1e-3 * max(b[k], 1.0))
    slope = (g(b[k] + db) - g(b[k] - db)) / (2.0 * db)
    if abs(slope) < 1e-12:
        return math.inf
    return se_g / abs(slope)
