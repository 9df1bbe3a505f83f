"""Monte Carlo validation: simulate the process on a fine grid, record the
last time at or below zero before an independent exponential horizon, and
evaluate the prediction loss E|g - tau| of candidate stopping rules.

Paths are generated exactly at the monitoring times (Gaussian increments
plus, for the jump model, compound Poisson jumps placed at their exact
times).  The running minimum can optionally be refined with exact Brownian
bridge segment minima, which removes the grid-monitoring bias of the
infimum statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _scan
from .boundary import BoundaryGrid
from .errors import ConfigError, DomainError
from .gain import GainContext
from .models import Kind, LevyModel
from .scale import F_theta


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; ``horizon_cap`` defaults to m_theta + 40/theta."""

    model: LevyModel
    theta: float
    dt: float = 1e-3
    n_paths: int = 100_000
    seed: int = 0
    horizon_cap: float | None = None
    bridge_min: bool = True

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ConfigError("theta must be positive")
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.n_paths <= 0:
            raise ConfigError("n_paths must be positive")

    @property
    def m_theta(self) -> float:
        return math.log(2.0) / self.theta

    @property
    def cap(self) -> float:
        if self.horizon_cap is not None:
            return self.horizon_cap
        return self.m_theta + 40.0 / self.theta


@dataclass(frozen=True)
class StoppingRule:
    """A candidate predictor of g.

    ``boundary`` rules stop at the first monitoring time with
    X_t >= b(t) (step boundary ``b`` with spacing ``h_b`` on [0, m_theta)),
    defaulting to m_theta when no crossing occurs.  ``constant`` rules
    predict the fixed time ``tau``.
    """

    name: str
    kind: str
    b: np.ndarray | None = None
    h_b: float | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in ("boundary", "constant"):
            raise ConfigError(f"unknown rule kind {self.kind!r}")
        if self.kind == "boundary" and (self.b is None or self.h_b is None):
            raise ConfigError("boundary rule needs b and h_b")
        if self.kind == "constant" and self.tau is None:
            raise ConfigError("constant rule needs tau")


def zero_rule() -> StoppingRule:
    """Predict tau = 0; its mean loss is E[g]."""
    return StoppingRule(name="predict-zero", kind="constant", tau=0.0)


def constant_time_rule(tau: float, name: str | None = None) -> StoppingRule:
    return StoppingRule(name=name or f"predict-t={tau:g}", kind="constant",
                        tau=float(tau))


def boundary_rule(grid: BoundaryGrid, shift: float = 0.0,
                  name: str | None = None) -> StoppingRule:
    """First crossing of the solved boundary, optionally shifted in space."""
    if name is None:
        name = "boundary" if shift == 0.0 else f"boundary{shift:+g}"
    return StoppingRule(name=name, kind="boundary",
                        b=np.asarray(grid.b, dtype=float) + shift,
                        h_b=grid.h_step)


def constant_level_rule(level: float, name: str | None = None) -> StoppingRule:
    """First crossing of the flat level b(t) = level on [0, m_theta)."""
    return StoppingRule(name=name or f"level={level:g}", kind="boundary",
                        b=np.array([float(level)]), h_b=math.inf)


@dataclass
class SimReport:
    """Per-rule loss estimates plus the raw per-path statistics."""

    config: SimConfig
    rule_names: list[str]
    means: np.ndarray          # mean loss E|g - tau| per rule
    ses: np.ndarray
    diff_means: np.ndarray     # paired mean(loss_r - loss_0)
    diff_ses: np.ndarray
    g_mean: float
    g_se: float
    truncated: int
    backend: str
    g: np.ndarray = field(repr=False)
    mins: np.ndarray = field(repr=False)
    losses: np.ndarray = field(repr=False)   # (n_rules, n_paths)

    def summary_lines(self) -> list[str]:
        lines = [
            f"paths={self.config.n_paths} dt={self.config.dt:g} "
            f"seed={self.config.seed} backend={self.backend} "
            f"truncated={self.truncated}",
            f"E[g] = {self.g_mean:.6f} (se {self.g_se:.6f})",
        ]
        for r, name in enumerate(self.rule_names):
            lines.append(
                f"{name}: loss {self.means[r]:.6f} (se {self.ses[r]:.6f}), "
                f"diff vs {self.rule_names[0]} {self.diff_means[r]:+.6f} "
                f"(se {self.diff_ses[r]:.6f})")
        return lines

    def to_csv(self, path, provenance_lines: list[str] | None = None) -> None:
        with open(path, "w") as fh:
            for line in provenance_lines or []:
                fh.write(f"# {line}\n")
            fh.write("rule,mean_loss,se,diff_vs_first,diff_se\n")
            for r, name in enumerate(self.rule_names):
                fh.write(f"{name},{self.means[r]:.12g},{self.ses[r]:.12g},"
                         f"{self.diff_means[r]:.12g},{self.diff_ses[r]:.12g}\n")


class _BlockSampler:
    """Serves variates from large pre-drawn blocks of a dedicated stream."""

    def __init__(self, rng: np.random.Generator, draw, block: int = 1 << 22):
        self._rng = rng
        self._draw = draw
        self._block = block
        self._buf = np.empty(0)
        self._pos = 0

    def take(self, n: int) -> np.ndarray:
        out = np.empty(n)
        filled = 0
        while filled < n:
            if self._pos >= self._buf.size:
                self._buf = self._draw(self._rng, max(self._block, n - filled))
                self._pos = 0
            m = min(n - filled, self._buf.size - self._pos)
            out[filled:filled + m] = self._buf[self._pos:self._pos + m]
            self._pos += m
            filled += m
        return out


def evaluate_rules(cfg: SimConfig, rules: list[StoppingRule]) -> SimReport:
    """Simulate cfg.n_paths paths and score every rule on each of them
    (common paths, so paired loss differences have small variance)."""
    if not rules:
        raise ConfigError("need at least one stopping rule")
    model = cfg.model
    theta = cfg.theta
    m_theta = cfg.m_theta
    cap = cfg.cap
    mu, sig = model.mu, model.sigma
    is_jump = model.kind == Kind.JUMP_DIFFUSION

    b_rules = [r for r in rules if r.kind == "boundary"]
    n_b = len(b_rules)
    max_nb = max((r.b.size for r in b_rules), default=1)
    rules_b = np.full((n_b, max_nb), np.inf)
    rules_nb = np.empty(n_b, dtype=np.int64)
    rules_hb = np.empty(n_b)
    for r, rule in enumerate(b_rules):
        rules_b[r, :rule.b.size] = rule.b
        rules_nb[r] = rule.b.size
        rules_hb[r] = rule.h_b
    taus_out = np.empty(max(n_b, 1))

    root = np.random.default_rng(cfg.seed)
    rng_e, rng_jump, rng_norm, rng_bridge = root.spawn(4)
    norms = _BlockSampler(rng_norm, lambda r, n: r.standard_normal(n))
    unis = _BlockSampler(rng_bridge, lambda r, n: r.random(n))

    e_all = rng_e.exponential(1.0 / theta, cfg.n_paths)

    g_arr = np.empty(cfg.n_paths)
    min_arr = np.empty(cfg.n_paths)
    tau_mat = np.empty((n_b, cfg.n_paths))
    truncated = 0

    empty = np.empty(0)
    for p in range(cfg.n_paths):
        e = e_all[p]
        if e > cap:
            truncated += 1
        t_horizon = min(e, cap)
        t_sim = min(cap, max(e, m_theta)) if n_b else t_horizon

        n_full = int(math.floor(t_sim / cfg.dt + 1e-9))
        specials = []
        if t_horizon < t_sim:
            specials.append(t_horizon)
        if n_full == 0 or n_full * cfg.dt < t_sim - 1e-12:
            specials.append(t_sim)
        specials = np.array(sorted(specials)) if specials else empty
        if is_jump:
            count = int(rng_jump.poisson(model.lam * t_sim))
            jt = np.sort(rng_jump.random(count)) * t_sim
            js = rng_jump.standard_exponential(count) / model.rho
        else:
            jt = js = empty

        z = norms.take(n_full + specials.size + jt.size)
        if cfg.bridge_min:
            # generous count of events at or before the horizon; the kernel
            # consumes a prefix, the sampler position is what must be
            # reproducible
            n_within = (min(n_full, int(math.floor(t_horizon / cfg.dt + 1e-9)) + 1)
                        + int(np.sum(specials <= t_horizon))
                        + int(np.searchsorted(jt, t_horizon, side="right")) + 2)
            u = unis.take(n_within)
        else:
            u = empty

        g, min_x = _scan.path_stats(mu, sig, cfg.dt, n_full, specials, jt, js,
                                    t_horizon, z, u, cfg.bridge_min,
                                    rules_b, rules_nb, rules_hb, m_theta,
                                    taus_out)
        g_arr[p] = g
        min_arr[p] = min_x
        tau_mat[:, p] = taus_out[:n_b]

    losses = np.empty((len(rules), cfg.n_paths))
    bi = 0
    for r, rule in enumerate(rules):
        if rule.kind == "constant":
            losses[r] = np.abs(g_arr - rule.tau)
        else:
            losses[r] = np.abs(g_arr - tau_mat[bi])
            bi += 1

    n = cfg.n_paths
    means = losses.mean(axis=1)
    ses = losses.std(axis=1, ddof=1) / math.sqrt(n)
    diffs = losses - losses[0]
    diff_means = diffs.mean(axis=1)
    diff_ses = diffs.std(axis=1, ddof=1) / math.sqrt(n)
    return SimReport(config=cfg, rule_names=[r.name for r in rules],
                     means=means, ses=ses, diff_means=diff_means,
                     diff_ses=diff_ses,
                     g_mean=float(g_arr.mean()),
                     g_se=float(g_arr.std(ddof=1) / math.sqrt(n)),
                     truncated=truncated, backend=_scan.BACKEND,
                     g=g_arr, mins=min_arr, losses=losses)


def ks_against_inf_law(mins: np.ndarray, ctx: GainContext) -> float:
    """Kolmogorov-Smirnov distance between the simulated -min sample and the
    exponential-horizon infimum law F."""
    if np.any(mins > 0.0):
        raise DomainError("running minima must be nonpositive")
    return float(stats.kstest(-mins,
                              lambda v: F_theta(ctx.scale, v)).statistic)
