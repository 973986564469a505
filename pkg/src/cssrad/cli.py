"""``cssrad`` command-line driver.

    cssrad <subcommand> [--config PATH] [--seed N] [--out DIR] [overrides]

Exit status: 0 on success, 2 on configuration errors, 3 when the solver
aborts on a numerical instability. Results are JSON (reports, summaries) and
CSV (fields and series, floats written with 17 significant digits).
``summary.json`` is reproducible byte for byte; wall time goes to
``timing.json``.
"""

import argparse
import csv
import json
import logging
import os
import re
import sys
import time

import numpy as np

from . import __version__
from .boardgame import budget_table, enumerate_sigma, raw_term_count
from .config import COMMANDS, CONVERGE_TARGETS, ConfigError, RunSummary, from_dict
from .convergence import converge
from .estimates import Ensemble, run_suite
from .gauge import gauge_fields, read_density_csv, write_gauge_csv
from .solver import PRESETS, InstabilityError, SolverConfig, boundary_mass_fraction, run

log = logging.getLogger("cssrad")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3


def _fmt(x):
    return "%.17g" % x


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _finish(cfg, metrics, warnings=(), started=None):
    summary = RunSummary(cfg.command, __version__, cfg.to_dict(), list(warnings), cfg.tags(), metrics)
    with open(os.path.join(cfg.out, "summary.json"), "w") as fh:
        fh.write(summary.to_json())
    if started is not None:
        _write_json(os.path.join(cfg.out, "timing.json"), {"wall_time_s": time.perf_counter() - started})
    return summary


def _rel_drift(series):
    s = np.asarray(series, dtype=float)
    ref = abs(s[0]) if s.size and s[0] != 0 else 1.0
    return float(np.max(np.abs(s - s[0])) / ref) if s.size else 0.0


# --------------------------------------------------------------------------
# subcommands


def _solver_config(cfg):
    return SolverConfig(**cfg.simulate)


def _initial(cfg, grid):
    kw = {k: v for k, v in cfg.initial.items() if k != "preset"}
    return PRESETS[cfg.initial["preset"]](grid, **kw)


def cmd_simulate(cfg):
    scfg = _solver_config(cfg)
    traj = run(scfg, _initial(cfg, scfg.grid))
    snapdir = os.path.join(cfg.out, "snapshots")
    os.makedirs(snapdir, exist_ok=True)
    for i, f in enumerate(traj.fields):
        _write_csv(os.path.join(snapdir, f"phi_{i:05d}.csv"), ["r", "re_phi", "im_phi"],
                   zip(f.grid.nodes, f.values.real, f.values.imag))
    _write_csv(os.path.join(cfg.out, "series.csv"), ["t", "charge", "energy"],
               zip(traj.times, traj.charge_series, traj.energy_series))
    metrics = {
        "regime": scfg.regime,
        "steps": scfg.nsteps,
        "snapshots": len(traj),
        "t_final": traj.times[-1],
        "charge_initial": traj.charge_series[0],
        "energy_initial": traj.energy_series[0],
        "charge_relative_drift": _rel_drift(traj.charge_series),
        "energy_relative_drift": _rel_drift(traj.energy_series),
        "boundary_mass_fraction": boundary_mass_fraction(traj.fields[-1]),
        "charge_series": [float(x) for x in traj.charge_series],
        "energy_series": [float(x) for x in traj.energy_series],
    }
    return metrics, traj.warnings


def cmd_hierarchy_check(cfg):
    h = cfg.hierarchy
    if not h["run_dir"]:
        raise ConfigError(["hierarchy.run_dir: a completed simulate run directory is required"])
    path = os.path.join(h["run_dir"], "summary.json")
    try:
        with open(path) as fh:
            prior = RunSummary.from_json(fh.read())
    except (OSError, ValueError, TypeError) as exc:
        raise ConfigError([f"hierarchy.run_dir: cannot read a run summary at {path}: {exc}"]) from None
    if prior.command != "simulate":
        raise ConfigError([f"hierarchy.run_dir: {path} is a {prior.command!r} run, not simulate"])
    base = from_dict({"simulate": {k: v for k, v in prior.config["simulate"].items()} |
                      {"initial": prior.config["initial"]}}, "simulate")
    report = converge("hierarchy", h["levels"], base.simulate, base.initial, hier=h, k=h["k"])
    report.update({"k": h["k"], "run_dir": h["run_dir"], "g": base.simulate["g"]})
    _write_json(os.path.join(cfg.out, "hierarchy.json"), report)
    return {"residuals": [r["error"] for r in report["levels"]], "orders": report["orders"]}, []


def _safe_name(s):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", s).strip("_")


def cmd_estimates(cfg):
    e = cfg.estimates
    ens = Ensemble(seed=cfg.seed, count=e["count"])
    reps = run_suite(ens, n=e["n"], r_max=e["r_max"], time_samples=e["time_samples"], s=e["s"], t0=e["t0"],
                     refine=e["refine"], select=e["select"] or None, qs=tuple(e["q"]))
    repdir = os.path.join(cfg.out, "reports")
    os.makedirs(repdir, exist_ok=True)
    rows = []
    for rep in reps:
        _write_json(os.path.join(repdir, _safe_name(rep.estimate) + ".json"), rep.to_dict())
        for i, (a, b, q) in enumerate(zip(rep.lhs, rep.rhs, rep.ratios)):
            rows.append((rep.estimate, i, a, b, "" if q is None else q))
    _write_csv(os.path.join(cfg.out, "ratios.csv"), ["estimate", "sample", "lhs", "rhs", "ratio"], rows)
    metrics = {
        "max_ratios": {r.estimate: r.max_ratio for r in reps},
        "refined_max_ratios": {r.estimate: r.refined_max_ratio for r in reps},
        "all_finite": all(r.finite for r in reps),
        "all_refinement_stable": all(bool(r.refinement_stable) for r in reps) if e["refine"] else None,
        "estimates": len(reps),
    }
    return metrics, []


def cmd_boardgame(cfg):
    b = cfg.boardgame
    table = budget_table(b["depth"])
    maps = {str(j): [list(m.values) for m in enumerate_sigma(j)] for j in range(1, min(b["depth"], b["list_maps_up_to"]) + 1)}
    raw = [{"depth": r, "raw_count": raw_term_count(r).raw_count, "budget": raw_term_count(r).budget}
           for r in range(1, b["depth"] + 1)]
    _write_json(os.path.join(cfg.out, "boardgame.json"), {"budget_table": table, "maps": maps, "raw_counts": raw})
    flagged = [row["depth"] for row in table if row["exceeds_budget"]]
    return {"sigma_counts": {str(r["depth"]): r["sigma_count"] for r in table}, "exceeds_budget": flagged}, []


def cmd_gauge_table(cfg):
    path = cfg.gauge_table["density"]
    if not path:
        raise ConfigError(["gauge_table.density: a CSV of r, rho is required"])
    try:
        rho = read_density_csv(path)
    except (OSError, ValueError) as exc:
        raise ConfigError([f"gauge_table.density: {exc}"]) from None
    gf = gauge_fields(rho)
    write_gauge_csv(os.path.join(cfg.out, "gauge.csv"), gf)
    return {"n": rho.grid.n, "r_max": rho.grid.r_max, "a_theta_outer": float(gf.a_theta[-1]),
            "a_zero_inner": float(gf.a_zero[0])}, []


def cmd_converge(cfg):
    c = cfg.converge
    report = converge(c["target"], c["levels"], cfg.simulate, cfg.initial, hier=cfg.hierarchy, k=c["k"],
                      lam=c["lam"])
    _write_json(os.path.join(cfg.out, "converge.json"), report)
    return {"errors": [r["error"] for r in report["levels"]], "orders": report["orders"]}, []


HANDLERS = {
    "simulate": cmd_simulate,
    "hierarchy-check": cmd_hierarchy_check,
    "estimates": cmd_estimates,
    "boardgame": cmd_boardgame,
    "gauge-table": cmd_gauge_table,
    "converge": cmd_converge,
}


# --------------------------------------------------------------------------
# argument handling


def build_parser():
    p = argparse.ArgumentParser(prog="cssrad", description="Radial Chern-Simons-Schrodinger laboratory")
    p.add_argument("--version", action="version", version=f"cssrad {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--seed", type=int, help="override the top-level seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    parsers = {name: sub.add_parser(name, parents=[common]) for name in COMMANDS}
    h = parsers["hierarchy-check"]
    h.add_argument("--run-dir", help="completed simulate run directory")
    h.add_argument("--k", type=int, choices=(1, 2))
    h.add_argument("--levels", type=int)
    e = parsers["estimates"]
    e.add_argument("--estimate", action="append", dest="select", help="estimate id prefix (repeatable)")
    e.add_argument("--count", type=int)
    e.add_argument("--n", type=int)
    e.add_argument("--s", type=float)
    e.add_argument("--q", type=float, action="append")
    e.add_argument("--t0", type=float)
    e.add_argument("--no-refine", dest="refine", action="store_false", default=None)
    parsers["boardgame"].add_argument("--depth", type=int)
    parsers["gauge-table"].add_argument("--density", help="CSV with columns r, rho")
    c = parsers["converge"]
    c.add_argument("--target", choices=CONVERGE_TARGETS)
    c.add_argument("--levels", type=int)
    return p


_OVERRIDES = {
    "hierarchy-check": ("hierarchy", {"run_dir": "run_dir", "k": "k", "levels": "levels"}),
    "estimates": ("estimates", {"select": "select", "count": "count", "n": "n", "s": "s", "q": "q", "t0": "t0",
                                "refine": "refine"}),
    "boardgame": ("boardgame", {"depth": "depth"}),
    "gauge-table": ("gauge_table", {"density": "density"}),
    "converge": ("converge", {"target": "target", "levels": "levels"}),
}


def _raw_document(path):
    if not path:
        return {}
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: syntax error: {exc}"]) from None


def resolve_config(args):
    """Merge the TOML file with command-line overrides and validate once."""
    doc = _raw_document(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["out"] = args.out
    if args.command in _OVERRIDES:
        section, mapping = _OVERRIDES[args.command]
        block = doc.setdefault(section, {})
        for attr, key in mapping.items():
            v = getattr(args, attr, None)
            if v is not None:
                block[key] = v
    return from_dict(doc, args.command)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        cfg = resolve_config(args)
        os.makedirs(cfg.out, exist_ok=True)
        metrics, warnings = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"cssrad: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"cssrad: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    summary = _finish(cfg, metrics, warnings, started)
    print(json.dumps({"command": summary.command, "out": cfg.out, **{k: v for k, v in metrics.items()
                                                                      if not isinstance(v, (list, dict))}},
                     sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
