"""Refinement studies: rerun a target with ``(h, dt)`` halved per level."""

import math

import numpy as np

from .hierarchy import duhamel_check, hierarchy_residual
from .radial import RadialField, RadialGrid, free_propagate, l2_norm
from .solver import PRESETS, InstabilityError, SolverConfig, _advance, run, scaling_check


def observed_orders(errors, ratio=2.0):
    """``log_ratio(e_l / e_{l+1})`` for consecutive levels (NaN when undefined)."""
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(math.log(a / b, ratio) if a > 0 and b > 0 else float("nan"))
    return out


def restrict_halving(fine):
    """Average pairs of nodes of a grid with 2n cells onto the n-cell grid."""
    v = np.asarray(fine.values)
    grid = RadialGrid(fine.grid.n // 2, fine.grid.r_max)
    return RadialField(grid, 0.5 * (v[0::2] + v[1::2]), fine.time)


def gaussian_exact(grid, t, width=1.0, amplitude=1.0):
    """Free evolution of ``A exp(-r^2 / (2 w^2))`` in the plane."""
    a = 1.0 / (2.0 * width**2)
    z = 1.0 + 4j * a * t
    return RadialField(grid, amplitude * np.exp(-a * grid.nodes**2 / z) / z, t)


def _initial(grid, initial):
    kw = {k: v for k, v in initial.items() if k != "preset"}
    return PRESETS[initial["preset"]](grid, **kw)


def _level_cfg(n, r_max, dt, t_end, g, level, **extra):
    return SolverConfig(g=g, dt=dt / 2**level, t_end=t_end, n=n * 2**level, r_max=r_max, **extra)


def converge(target, levels, sim, initial, hier=None, k=1, lam=2.0):
    """Order table for ``target``.

    ``sim`` holds ``n, r_max, dt, t_end, g`` for the solver-level targets
    (``free_gaussian``, ``solver``, ``scaling``); ``hier`` holds ``n, r_max, dt,
    t_end, stride`` for ``hierarchy`` and ``duhamel``, which run on coarse grids.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    rows = []
    if target == "free_gaussian":
        if initial["preset"] != "gaussian":
            raise ValueError("free_gaussian needs the gaussian preset")
        for lev in range(levels):
            cfg = _level_cfg(sim["n"], sim["r_max"], sim["dt"], sim["t_end"], 0.0, lev)
            phi0 = _initial(cfg.grid, initial)
            out = free_propagate(phi0, cfg.dt, cfg.nsteps)
            ex = gaussian_exact(cfg.grid, out.time, initial["width"], initial["amplitude"])
            err = l2_norm(out.with_values(out.values - ex.values))
            rows.append({"level": lev, "n": cfg.n, "dt": cfg.dt, "error": err})
    elif target == "solver":
        finals = []
        for lev in range(levels + 1):
            cfg = _level_cfg(sim["n"], sim["r_max"], sim["dt"], sim["t_end"], sim["g"], lev)
            phi0 = _initial(cfg.grid, initial)
            vals, bad = _advance(phi0, cfg.nsteps, cfg.dt, cfg.g, cfg.growth_tol)
            if bad >= 0:
                raise InstabilityError((bad + 1) * cfg.dt, bad + 1)
            finals.append((cfg, phi0.with_values(vals, cfg.nsteps * cfg.dt)))
        for lev in range(levels):
            cfg, coarse = finals[lev]
            diff = coarse.values - restrict_halving(finals[lev + 1][1]).values
            rows.append({"level": lev, "n": cfg.n, "dt": cfg.dt, "error": l2_norm(coarse.with_values(diff))})
    elif target == "scaling":
        for lev in range(levels):
            cfg = _level_cfg(sim["n"], sim["r_max"], sim["dt"], sim["t_end"], sim["g"], lev)
            rep = scaling_check(_initial(cfg.grid, initial), lam, cfg)
            rows.append({"level": lev, "n": cfg.n, "dt": cfg.dt, "error": rep.distance,
                         "charge_difference": rep.charge_difference})
    elif target in ("hierarchy", "duhamel"):
        hier = hier or {}
        for lev in range(levels):
            cfg = _level_cfg(hier["n"], hier["r_max"], hier["dt"], hier["t_end"], sim["g"], lev,
                             record_every=1)
            traj = run(cfg, _initial(cfg.grid, initial))
            if target == "hierarchy":
                mid = len(traj) // 2
                rep = hierarchy_residual(traj, k, stride=hier.get("stride", 1), indices=[mid])
                err = rep.max_norm
            else:
                rep = duhamel_check(traj, stride=hier.get("stride", 1))
                err = rep.norms[-1]
            rows.append({"level": lev, "n": cfg.n, "dt": cfg.dt, "error": err, "time": rep.times[-1]})
    else:
        raise ValueError(f"unknown convergence target {target!r}")
    errs = [r["error"] for r in rows]
    return {"target": target, "levels": rows, "orders": observed_orders(errs)}
