"""Per-path simulation kernel: builds one path at its monitoring times and
extracts the last time at or below zero, the running minimum (optionally
refined with exact bridge segment minima), and the first boundary crossing
per stopping rule.

This is the hot inner loop of the simulator.  The numba implementation
streams through the merged event times without allocating path arrays; the
pure-numpy fallback materializes the path.  Set ``LASTZERO_BACKEND=numpy``
to force the fallback (same distribution, slower).
``benchmarks/backend_bench.py`` compares the two.

Kernel signature (both backends)::

    path_stats(mu, sig, dt, n_full, specials, jt, js, t_horizon,
               z, u, use_bridge, rules_b, rules_nb, rules_hb,
               m_theta, taus_out) -> (g, min_x)

where ``n_full`` counts the regular grid times ``dt, 2 dt, ...``,
``specials`` holds the horizon/endpoint times, ``jt``/``js`` the jump times
and sizes, ``z`` one standard normal per event, and ``u`` uniforms for the
bridge minima.  Statistics cover events with t <= t_horizon; rule crossings
are tracked on the whole path (which extends to m_theta when rules are
present).  At coincident event times the processing order is specials,
jumps, grid.
"""

from __future__ import annotations

import math
import os

import numpy as np

_ENV_VAR = "LASTZERO_BACKEND"


def _path_stats_py(mu, sig, dt, n_full, specials, jt, js, t_horizon,
                   z, u, use_bridge, rules_b, rules_nb, rules_hb,
                   m_theta, taus_out):
    base = np.arange(1, n_full + 1) * dt
    add_t = np.concatenate([specials, jt])
    add_v = np.concatenate([np.zeros(specials.size), -js])
    order = np.argsort(add_t, kind="stable")
    add_t = add_t[order]
    add_v = add_v[order]
    pos = np.searchsorted(base, add_t)
    times = np.insert(base, pos, add_t)
    jv = np.insert(np.zeros(n_full), pos, add_v)

    dts = np.diff(times, prepend=0.0)
    xs = np.cumsum(mu * dts + sig * np.sqrt(dts) * z + jv)
    times = np.concatenate(([0.0], times))
    xs = np.concatenate(([0.0], xs))
    n_e = int(np.searchsorted(times, t_horizon, side="right"))

    head = xs[:n_e]
    leq = np.nonzero(head <= 0.0)[0]
    i = int(leq[-1])
    if i + 1 < n_e:
        x0, x1 = xs[i], xs[i + 1]
        g = times[i] + (times[i + 1] - times[i]) * (-x0) / (x1 - x0)
    else:
        g = times[i]
    min_x = float(np.min(head))

    if use_bridge and n_e > 1:
        a = xs[:n_e - 1]
        c = xs[1:n_e] - jv[:n_e - 1]
        gap = c - a
        ln_u = np.log1p(-u[:n_e - 1])
        seg = 0.5 * (a + c - np.sqrt(gap * gap
                                     - 2.0 * sig * sig * dts[:n_e - 1] * ln_u))
        min_x = min(min_x, float(np.min(seg)))

    live = times < m_theta
    t_live = times[live]
    x_live = xs[live]
    for r in range(rules_b.shape[0]):
        idx = np.minimum((t_live / rules_hb[r]).astype(np.int64),
                         rules_nb[r] - 1)
        hit = x_live >= rules_b[r, idx]
        if np.any(hit):
            taus_out[r] = t_live[int(np.argmax(hit))]
        else:
            taus_out[r] = m_theta
    return float(g), min_x


def _make_numba_kernel():
    import numba

    @numba.njit(cache=True)
    def _path_stats_nb(mu, sig, dt, n_full, specials, jt, js, t_horizon,
                       z, u, use_bridge, rules_b, rules_nb, rules_hb,
                       m_theta, taus_out):  # pragma: no cover - via dispatch
        sig2 = sig * sig
        n_rules = rules_b.shape[0]
        n_live = n_rules
        for r in range(n_rules):
            taus_out[r] = m_theta
            if 0.0 >= rules_b[r, 0]:
                taus_out[r] = 0.0
                n_live -= 1

        g = 0.0
        min_x = 0.0
        t_prev = 0.0
        x_prev = 0.0
        zi = 0
        ui = 0
        gi = 1
        ji = 0
        si = 0
        nj = jt.shape[0]
        ns = specials.shape[0]
        while True:
            typ = -1
            t_next = math.inf
            if gi <= n_full:
                t_next = gi * dt
                typ = 2
            if ji < nj and jt[ji] <= t_next:
                t_next = jt[ji]
                typ = 1
            if si < ns and specials[si] <= t_next:
                t_next = specials[si]
                typ = 0
            if typ == -1:
                break
            delta = t_next - t_prev
            if delta < 0.0:
                delta = 0.0
            c = x_prev + mu * delta + sig * math.sqrt(delta) * z[zi]
            zi += 1
            within = t_next <= t_horizon
            if within and use_bridge:
                gap = c - x_prev
                ln_u = math.log1p(-u[ui])
                ui += 1
                seg = 0.5 * (x_prev + c
                             - math.sqrt(gap * gap - 2.0 * sig2 * delta * ln_u))
                if seg < min_x:
                    min_x = seg
            x_cur = c
            if typ == 1:
                x_cur -= js[ji]
                ji += 1
            elif typ == 0:
                si += 1
            else:
                gi += 1
            if within:
                if x_cur <= 0.0:
                    g = t_next
                elif x_prev <= 0.0:
                    g = t_prev + delta * (-x_prev) / (x_cur - x_prev)
                if x_cur < min_x:
                    min_x = x_cur
            if n_live > 0 and t_next < m_theta:
                for r in range(n_rules):
                    if taus_out[r] == m_theta:
                        idx = int(t_next / rules_hb[r])
                        if idx >= rules_nb[r]:
                            idx = rules_nb[r] - 1
                        if x_cur >= rules_b[r, idx]:
                            taus_out[r] = t_next
                            n_live -= 1
            t_prev = t_next
            x_prev = x_cur
        return g, min_x

    return _path_stats_nb


def _select():
    choice = os.environ.get(_ENV_VAR, "numba").lower()
    if choice == "numpy":
        return _path_stats_py, "numpy"
    if choice != "numba":
        raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    try:
        return _make_numba_kernel(), "numba"
    except ImportError:
        return _path_stats_py, "numpy"


path_stats, BACKEND = _select()
