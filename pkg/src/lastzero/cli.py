"""Command-line front end: ``lastzero solve|value|simulate|validate``.

Reads a flat INI config (sections [model], [problem], [solver], [sim],
[value]), runs the requested pipeline, and writes CSV artifacts with
``#``-comment provenance headers (config hash, seeds, versions) so a rerun
with the same config and seed reproduces every file bitwise.

Exit codes: 0 success, 1 error (bad config, missing or mismatched inputs),
2 validation or certification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
from configparser import ConfigParser
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__, _scan
from .boundary import BoundaryGrid, solve_boundary_brownian, solve_boundary_jump
from .errors import ConfigError, LastZeroError
from .gain import GainContext, h as h_curve
from .kernels import McKernelTable
from .models import Kind, LevyModel
from .scale import F_theta, F_theta_brownian_closed_form
from .simulator import (SimConfig, boundary_rule, constant_level_rule,
                        evaluate_rules, ks_against_inf_law, zero_rule)
from .valuation import default_x_grid, value_brownian, value_jump, value_point

_SCHEMA = {
    "model": {"kind", "mu", "sigma", "lam", "rho"},
    "problem": {"theta"},
    "solver": {"n", "h0", "n_paths", "seed"},
    "sim": {"dt", "n_paths", "seed", "horizon_cap", "bridge_min"},
    "value": {"n_x", "t_stride"},
}

#: 1% two-sided Kolmogorov-Smirnov critical coefficient
_KS_COEFF_1PCT = math.sqrt(-0.5 * math.log(0.005))


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of the config file plus the file's hash."""

    model: LevyModel
    theta: float
    n: int
    h0: float
    kernel_paths: int
    solver_seed: int
    sim_dt: float
    sim_paths: int
    sim_seed: int
    sim_cap: float | None
    bridge_min: bool
    n_x: int
    t_stride: int | None
    sha256: str

    def model_tag(self) -> str:
        m = self.model
        tag = f"{m.kind.value} mu={m.mu:.12g} sigma={m.sigma:.12g}"
        if m.kind == Kind.JUMP_DIFFUSION:
            tag += f" lam={m.lam:.12g} rho={m.rho:.12g}"
        return tag + f" theta={self.theta:.12g}"

    def sim_config(self, seed_override: int | None = None) -> SimConfig:
        return SimConfig(model=self.model, theta=self.theta, dt=self.sim_dt,
                         n_paths=self.sim_paths,
                         seed=self.sim_seed if seed_override is None
                         else seed_override,
                         horizon_cap=self.sim_cap, bridge_min=self.bridge_min)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    parser = ConfigParser()
    parser.read_string(raw.decode())

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        extra = set(parser[section]) - _SCHEMA[section]
        if extra:
            raise ConfigError(
                f"unknown keys in [{section}]: {', '.join(sorted(extra))}")
    for required in ("model", "problem"):
        if required not in parser:
            raise ConfigError(f"missing config section [{required}]")

    def get(section, key, conv, default):
        if section in parser and key in parser[section]:
            text = parser[section][key]
            try:
                return conv(text)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for {section}.{key}: {text!r}") from exc
        if default is _REQUIRED:
            raise ConfigError(f"missing config key {section}.{key}")
        return default

    kind = get("model", "kind", str, _REQUIRED).strip().lower()
    mu = get("model", "mu", float, _REQUIRED)
    sigma = get("model", "sigma", float, _REQUIRED)
    try:
        if kind == "brownian":
            for key in ("lam", "rho"):
                if key in parser["model"]:
                    raise ConfigError(f"model.{key} is only for kind=jump")
            model = LevyModel.brownian(mu, sigma)
        elif kind == "jump":
            model = LevyModel.jump_diffusion(mu, sigma,
                                             get("model", "lam", float,
                                                 _REQUIRED),
                                             get("model", "rho", float,
                                                 _REQUIRED))
        else:
            raise ConfigError(f"model.kind must be brownian or jump, "
                              f"got {kind!r}")
    except LastZeroError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    def as_bool(text):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(text)

    return RunConfig(
        model=model,
        theta=get("problem", "theta", float, _REQUIRED),
        n=get("solver", "n", int, 200),
        h0=get("solver", "h0", float, 0.05),
        kernel_paths=get("solver", "n_paths", int, 200_000),
        solver_seed=get("solver", "seed", int, 0),
        sim_dt=get("sim", "dt", float, 1e-3),
        sim_paths=get("sim", "n_paths", int, 100_000),
        sim_seed=get("sim", "seed", int, 0),
        sim_cap=get("sim", "horizon_cap", float, None),
        bridge_min=get("sim", "bridge_min", as_bool, True),
        n_x=get("value", "n_x", int, 121),
        t_stride=get("value", "t_stride", int, None),
        sha256=hashlib.sha256(raw).hexdigest(),
    )


class _Required:
    pass


_REQUIRED = _Required()


def _provenance(cfg: RunConfig, command: str, extra: dict | None = None) -> list[str]:
    import numba
    lines = [
        f"command = {command}",
        f"config_sha256 = {cfg.sha256}",
        f"versions = lastzero {__version__}; numpy {np.__version__}; "
        f"scipy {scipy.__version__}; numba {numba.__version__}",
        f"model = {cfg.model_tag()}",
    ]
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {val}")
    return lines


def _build_boundary(cfg: RunConfig):
    ctx = GainContext.create(cfg.model, cfg.theta)
    prov = {"theta": f"{cfg.theta:.12g}",
            "m_theta": f"{ctx.m_theta:.12g}",
            "model": cfg.model_tag(),
            "solver_seed": cfg.solver_seed}
    if cfg.model.kind == Kind.BROWNIAN:
        return ctx, None, solve_boundary_brownian(ctx, cfg.n, provenance=prov)
    table = _kernel_table(cfg, ctx)
    prov["kernel_paths"] = cfg.kernel_paths
    grid = solve_boundary_jump(ctx, table, cfg.n, h0=cfg.h0, provenance=prov)
    return ctx, table, grid


def _kernel_table(cfg: RunConfig, ctx: GainContext) -> McKernelTable:
    return McKernelTable.create(cfg.model, cfg.n, ctx.m_theta / cfg.n,
                                n_paths=cfg.kernel_paths, seed=cfg.solver_seed)


def _load_boundary(cfg: RunConfig, out: Path) -> BoundaryGrid:
    path = out / "boundary.csv"
    if not path.is_file():
        raise ConfigError(f"boundary file not found: {path} (run solve first)")
    grid = BoundaryGrid.from_csv(path)
    tag = grid.provenance.get("model")
    if tag != cfg.model_tag():
        raise ConfigError(
            f"boundary file model {tag!r} does not match config "
            f"{cfg.model_tag()!r}")
    return grid


def cmd_solve(cfg: RunConfig, out: Path, args) -> int:
    _ctx, _table, grid = _build_boundary(cfg)
    out.mkdir(parents=True, exist_ok=True)
    grid.to_csv(out / "boundary.csv", _provenance(cfg, "solve"))
    if not grid.all_certified:
        bad = int(np.sum(~grid.certified))
        print(f"boundary written with {bad} non-certified steps", file=sys.stderr)
        return 2
    print(f"wrote {out / 'boundary.csv'} ({grid.n} steps, certified)")
    return 0


def cmd_value(cfg: RunConfig, out: Path, args) -> int:
    ctx = GainContext.create(cfg.model, cfg.theta)
    grid = _load_boundary(cfg, out)
    xs = default_x_grid(ctx, grid, cfg.n_x)

    if args.slice is not None:
        t = _parse_slice(args.slice)
        k = int(round(t / grid.h_step))
        t_indices = np.array([min(k, grid.n)])
    else:
        stride = cfg.t_stride
        if stride is None:
            stride = 1 if cfg.model.kind == Kind.BROWNIAN else max(1, grid.n // 8)
        t_indices = np.arange(0, grid.n + 1, stride)

    if cfg.model.kind == Kind.BROWNIAN:
        vgrid = value_brownian(ctx, grid, xs, t_indices)
    else:
        if grid.v is None:
            raise ConfigError("boundary file lacks the jump-functional column")
        vgrid = value_jump(ctx, grid, _kernel_table(cfg, ctx), xs, t_indices)

    out.mkdir(parents=True, exist_ok=True)
    vgrid.to_csv(out / "value.csv", _provenance(cfg, "value"))
    print(f"wrote {out / 'value.csv'} "
          f"({t_indices.size} time slices x {xs.size} levels)")
    if vgrid.flagged:
        for msg in vgrid.flagged:
            print(f"invariant flag: {msg}", file=sys.stderr)
        return 2
    return 0


def cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    ctx = GainContext.create(cfg.model, cfg.theta)
    grid = _load_boundary(cfg, out)
    rules = [boundary_rule(grid, name="optimal"),
             zero_rule(),
             boundary_rule(grid, shift=0.2),
             boundary_rule(grid, shift=-0.2),
             constant_level_rule(float(grid.b[0]))]
    sim_cfg = cfg.sim_config(args.seed)
    report = evaluate_rules(sim_cfg, rules)

    table = None if cfg.model.kind == Kind.BROWNIAN else _kernel_table(cfg, ctx)
    v00 = value_point(ctx, grid, 0, 0.0, table)
    lhs = float(report.means[0])
    rhs = v00 + float(report.g_mean)
    # paired: loss_optimal - g has its own per-path spread
    se = float(report.diff_ses[1])
    pass_identity = abs(lhs - rhs) <= 3.0 * se + 1e-12

    out.mkdir(parents=True, exist_ok=True)
    prov = _provenance(cfg, "simulate",
                       {"seed": sim_cfg.seed, "backend": report.backend,
                        "dt": f"{sim_cfg.dt:.12g}",
                        "n_paths": sim_cfg.n_paths,
                        "truncated": report.truncated})
    with open(out / "sim_report.csv", "w") as fh:
        for line in prov:
            fh.write(f"# {line}\n")
        fh.write("row,name,mean_loss,se,diff_vs_optimal,diff_se,pass\n")
        for r, name in enumerate(report.rule_names):
            fh.write(f"rule,{name},{report.means[r]:.12g},"
                     f"{report.ses[r]:.12g},{report.diff_means[r]:.12g},"
                     f"{report.diff_ses[r]:.12g},\n")
        fh.write(f"identity,loss-vs-value,{lhs:.12g},{se:.12g},"
                 f"{lhs - rhs:.12g},{se:.12g},{int(pass_identity)}\n")
    for line in report.summary_lines():
        print(line)
    print(f"identity check: E|g - tau| = {lhs:.6f} vs V(0,0) + E[g] = "
          f"{rhs:.6f} ({'pass' if pass_identity else 'FAIL'})")
    print(f"wrote {out / 'sim_report.csv'}")
    return 0 if pass_identity else 2


def _parse_slice(text: str) -> float:
    if not text.startswith("t="):
        raise ConfigError(f"--slice must look like t=<real>, got {text!r}")
    try:
        t = float(text[2:])
    except ValueError as exc:
        raise ConfigError(f"bad slice time {text[2:]!r}") from exc
    if t < 0.0:
        raise ConfigError("slice time must be nonnegative")
    return t


def cmd_validate(cfg: RunConfig, out: Path, args) -> int:
    checks = []
    m = cfg.model
    bm = (m if m.kind == Kind.BROWNIAN
          else LevyModel.brownian(m.mu, m.sigma))

    ctx_bm = GainContext.create(bm, cfg.theta)
    xs = np.linspace(0.0, 10.0, 1000)
    gap = float(np.max(np.abs(F_theta(ctx_bm.scale, xs)
                              - F_theta_brownian_closed_form(bm, cfg.theta, xs))))
    checks.append(("scale-vs-closed-form", gap, 1e-10, gap <= 1e-10))

    ctx = GainContext.create(m, cfg.theta)
    sim_cfg = cfg.sim_config(args.seed)
    report = evaluate_rules(sim_cfg, [zero_rule()])
    ks = ks_against_inf_law(report.mins, ctx)
    ks_thresh = 1.5 * _KS_COEFF_1PCT / math.sqrt(sim_cfg.n_paths)
    checks.append(("infimum-ks", ks, ks_thresh, ks <= ks_thresh))

    coarse = solve_boundary_brownian(ctx_bm, cfg.n)
    fine = solve_boundary_brownian(ctx_bm, 4 * cfg.n)
    sup = float(np.max(np.abs(coarse.b - fine.b[::4])))
    checks.append(("grid-refinement", sup, 5e-2, sup <= 5e-2))

    near_bm = LevyModel.jump_diffusion(m.mu, m.sigma, 1e-6,
                                       m.rho if m.kind == Kind.JUMP_DIFFUSION
                                       else 1.0)
    ctx_nb = GainContext.create(near_bm, cfg.theta)
    table = McKernelTable.create(near_bm, cfg.n, ctx_nb.m_theta / cfg.n,
                                 n_paths=cfg.kernel_paths, seed=cfg.solver_seed)
    jump_grid = solve_boundary_jump(ctx_nb, table, cfg.n, h0=cfg.h0,
                                    estimate_se=True)
    band = 3.0 * np.maximum(jump_grid.b_se, 2e-3)
    dev = np.abs(jump_grid.b - coarse.b)
    worst = float(np.max(dev - band))
    checks.append(("lambda-degeneracy", worst, 0.0, worst <= 0.0))

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "validate.csv", "w") as fh:
        for line in _provenance(cfg, "validate", {"seed": sim_cfg.seed}):
            fh.write(f"# {line}\n")
        fh.write("check,value,threshold,pass\n")
        for name, value, thresh, ok in checks:
            fh.write(f"{name},{value:.12g},{thresh:.12g},{int(ok)}\n")
    all_ok = all(ok for *_, ok in checks)
    for name, value, thresh, ok in checks:
        print(f"{name}: {value:.6g} (threshold {thresh:.6g}) "
              f"{'pass' if ok else 'FAIL'}")
    print(f"wrote {out / 'validate.csv'}")
    return 0 if all_ok else 2


_COMMANDS = {
    "solve": cmd_solve,
    "value": cmd_value,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lastzero",
        description="Optimal prediction of the last time below zero of a "
                    "spectrally negative Levy process before an exponential "
                    "horizon.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--slice", default=None,
                        help="value command: single time slice, e.g. t=1")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the simulation seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](cfg, Path(args.out), args)
    except LastZeroError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
