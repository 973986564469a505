"""Acceptance criteria 1-9.

Run under pytest (one test per criterion, PASS/FAIL lines in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

import contextlib
import io
import json
import math
import sys
import tempfile
import time
from itertools import product
from pathlib import Path

import numpy as np
import pytest

from cssrad.boardgame import CLASS_COUNT_CAVEAT, budget_check, enumerate_sigma, raw_term_count
from cssrad.cli import main as cli_main
from cssrad.convergence import converge, gaussian_exact
from cssrad.estimates import Ensemble, estimate_gauge_bounds, estimate_mainnest, hardy_ratio, run_suite
from cssrad.gauge import a_zero_direct, compute_a_theta, compute_a_zero
from cssrad.hierarchy import collision, collision_closed_form, factorized, partial_trace
from cssrad.radial import RadialGrid, free_propagate, l2_norm
from cssrad.solver import SolverConfig, charge, gaussian, run

RESULTS = {}

GAUSSIAN = {"preset": "gaussian", "width": 1.0, "amplitude": 1.0}
HIER = {"n": 32, "r_max": 8.0, "dt": 2e-3, "t_end": 0.1, "stride": 1}

SUITE_IDS = {
    "hardy_rdr[p=2]", "hardy_rdr[p=4]",
    "hardy_rn_bar[n=0,p=2]", "hardy_rn_bar[n=0,p=inf]", "hardy_rn_bar[n=1,p=2]", "hardy_rn_bar[n=1,p=inf]",
    "hardy_dr_l1_l2",
    "a_theta_sup_l1", "a_theta_over_r_sup_l2", "a_theta_over_r2[p=2]", "a_theta_over_r2[p=inf]",
    "a_zero_lp[p=1]", "a_zero_lp[p=2]", "a_zero_sup_l2sq",
    "a_theta_sq_over_r2[p=2]", "a_theta_sq_over_r2[p=inf]", "a_theta_sq_over_r2_sup_l2sq",
    "a_theta_weighted_sq[q=2]", "a_theta_weighted[q=2]", "a_theta_weighted_sq[q=3]", "a_theta_weighted[q=3]",
    "a_zero_weighted[q=2]",
    "combined_potential", "gauge_product",
    "trilinear_hs[s=0.6667]", "trilinear_l2[s=0.6667]",
}

PINNED = {
    "indicator hardy_dr_l1_l2": 0.2303856588899375,
    "indicator a_theta_sup_l1": 0.07957747154594767,
    "gaussian combined_potential": 0.007411672189822686,
    "gaussian gauge_product": 0.00819718721125929,
}


def _orders_ok(orders, target=2.0, tol=0.2):
    return all(abs(o - target) <= tol for o in orders)


def criterion_1():
    t0 = time.perf_counter()
    errs = []
    for n, dt in ((512, 2e-3), (1024, 1e-3), (2048, 5e-4)):
        grid = RadialGrid(n, 16.0)
        out = free_propagate(gaussian(grid), dt, int(round(0.5 / dt)))
        errs.append(l2_norm(out.with_values(out.values - gaussian_exact(grid, 0.5).values)))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    runtime = time.perf_counter() - t0
    ok = errs[-1] <= 1e-4 and _orders_ok(orders) and runtime <= 30
    return ok, f"error {errs[-1]:.3e} at n=2048, orders {[round(o, 3) for o in orders]}, {runtime:.1f}s"


def _conservation(dt):
    cfg = SolverConfig(g=-1.0, dt=dt, t_end=1.0, n=1024, r_max=16.0, record_every=10)
    traj = run(cfg, gaussian(cfg.grid))
    q, e = np.array(traj.charge_series), np.array(traj.energy_series)
    return np.max(np.abs(q / q[0] - 1)), np.max(np.abs(e / e[0] - 1))


def criterion_2():
    q1, e1 = _conservation(1e-3)
    q2, e2 = _conservation(5e-4)
    ok = q1 <= 1e-8 and q2 <= 1e-8 and e1 <= 1e-4 and e1 / e2 >= 3
    return ok, f"charge drift {q1:.2e}, energy drift {e1:.2e} -> {e2:.2e} (x{e1 / e2:.2f})"


def criterion_3():
    grid = RadialGrid(4096, 4.0)
    r = grid.nodes
    rho = grid.sample(lambda s: (s <= 1.0) * 1.0)
    at_exact = np.where(r <= 1, -(r**2) / 4, -0.25)
    a0_exact = np.where(r <= 1, (1 - r**2) / 8, 0.0)
    a0 = compute_a_zero(rho).values
    e_at = np.max(np.abs(compute_a_theta(rho).values - at_exact)) / np.max(np.abs(at_exact))
    e_a0 = np.max(np.abs(a0 - a0_exact)) / np.max(np.abs(a0_exact))
    paths = np.max(np.abs(a_zero_direct(rho).values - a0))
    ok = e_at <= 1e-6 and e_a0 <= 1e-6 and paths <= 1e-8
    return ok, f"A_theta err {e_at:.2e}, A_0 err {e_a0:.2e}, quadrature paths differ by {paths:.1e}"


def criterion_4():
    sim = {"n": 256, "r_max": 16.0, "dt": 5e-3, "t_end": 0.2, "g": -1.0}
    rep = converge("scaling", 3, sim, GAUSSIAN, lam=2.0)
    dists = [row["error"] for row in rep["levels"]]
    ratios = [a / b for a, b in zip(dists, dists[1:])]
    qdiff = max(row["charge_difference"] for row in rep["levels"])
    ok = all(abs(x - 4) <= 0.6 for x in ratios) and qdiff <= 1e-10
    return ok, f"distances {[f'{d:.2e}' for d in dists]}, ratios {[round(x, 2) for x in ratios]}, charge diff {qdiff:.1e}"


def criterion_5():
    sim = {"g": -1.0}
    k1 = converge("hierarchy", 3, sim, GAUSSIAN, hier=HIER, k=1)["orders"]
    k2 = converge("hierarchy", 2, sim, GAUSSIAN, hier=HIER, k=2)["orders"]
    grid = RadialGrid(32, 8.0)
    phi = gaussian(grid, width=1.2)
    phi = phi.with_values(phi.values * np.exp(0.4j * grid.nodes**2) / math.sqrt(charge(phi)))
    adm = np.max(np.abs(partial_trace(factorized(phi, 2)).values - factorized(phi, 1).values))
    col = np.max(np.abs(collision(factorized(phi, 2), 1).values - collision_closed_form(phi)))
    ok = _orders_ok(k1 + k2, tol=0.3) and adm <= 1e-10 and col <= 1e-12
    return ok, (f"k=1 orders {[round(o, 2) for o in k1]}, k=2 orders {[round(o, 2) for o in k2]}, "
                f"admissibility {adm:.1e}, collision {col:.1e}")


def criterion_6():
    rep = converge("duhamel", 3, {"g": -1.0}, GAUSSIAN, hier=HIER)
    orders = rep["orders"]
    defects = [f"{row['error']:.2e}" for row in rep["levels"]]
    return _orders_ok(orders, tol=0.3), f"defects {defects}, orders {[round(o, 2) for o in orders]}"


def _pinned():
    ind = Ensemble(count=0, members=({"kind": "indicator", "radius": 1.0},))
    gau = Ensemble(count=0, members=({"a": 0.5},) * 3)
    comb, prod = estimate_mainnest(gau)
    got = {
        "indicator hardy_dr_l1_l2": hardy_ratio("inv_dr", 0, None, ind).max_ratio,
        "indicator a_theta_sup_l1": estimate_gauge_bounds(ind)[0].max_ratio,
        "gaussian combined_potential": comb.max_ratio,
        "gaussian gauge_product": prod.max_ratio,
    }
    return max(abs(got[k] / v - 1) for k, v in PINNED.items())


def criterion_7():
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    for seed in range(5):
        reps = run_suite(Ensemble(seed=seed, count=100))
        ids = {r.estimate for r in reps}
        if ids != SUITE_IDS:
            bad.append(f"seed {seed}: ids {sorted(ids ^ SUITE_IDS)}")
        for r in reps:
            worst = max(worst, r.refinement_change)
            if not (r.finite and math.isfinite(r.refined_max_ratio) and r.refinement_stable):
                bad.append(f"seed {seed}: {r.estimate}")
    pin = _pinned()
    runtime = time.perf_counter() - t0
    ok = not bad and pin <= 1e-6 and runtime <= 300
    return ok, (f"{len(SUITE_IDS)} estimates x 5 seeds finite, worst refinement change {100 * worst:.2f}%, "
                f"pinned rel diff {pin:.1e}, {runtime:.0f}s" + (f"; failures {bad}" if bad else ""))


def criterion_8():
    counts = all(len(enumerate_sigma(j)) == math.factorial(j) for j in range(1, 9))
    brute = all(
        [m.values for m in enumerate_sigma(j)]
        == sorted(t for t in product(range(1, j + 1), repeat=j) if t[0] == 1 and all(v < l for l, v in enumerate(t, 2)))
        for j in range(1, 8)
    )
    raw = all(raw_term_count(r).raw_count == 2**r * math.factorial(r) for r in range(1, 11))
    b9 = budget_check(9)
    flagged = b9["exceeds_budget"] and b9["note"] == CLASS_COUNT_CAVEAT and not budget_check(8)["exceeds_budget"]
    ok = counts and brute and raw and flagged
    return ok, f"counts {counts}, brute force {brute}, raw counts {raw}, j=9 flagged {flagged}"


def criterion_9():
    runs = [
        ["simulate", "--seed", "0"],
        ["boardgame", "--depth", "9"],
        ["estimates", "--seed", "0", "--count", "100"],
    ]
    sim_cfg = "[simulate]\nn = 1024\nr_max = 16.0\ndt = 1e-3\nt_end = 1.0\nrecord_every = 100\n"
    same = []
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "sim.toml"
        cfg.write_text(sim_cfg)
        for args in runs:
            out = Path(tmp) / args[0]
            full = args + ["--out", str(out)] + (["--config", str(cfg)] if args[0] == "simulate" else [])
            blobs = []
            for _ in range(2):
                with contextlib.redirect_stdout(io.StringIO()):
                    code = cli_main(full)
                if code != 0:
                    return False, f"{args[0]} failed"
                blobs.append((out / "summary.json").read_bytes())
                json.loads(blobs[-1])
            same.append(blobs[0] == blobs[1])
    return all(same), "byte-identical summaries: " + ", ".join(f"{a[0]}={s}" for a, s in zip(runs, same))


CRITERIA = {
    1: ("free-evolution exactness", criterion_1),
    2: ("conservation", criterion_2),
    3: ("gauge closed forms", criterion_3),
    4: ("scaling symmetry", criterion_4),
    5: ("hierarchy consistency", criterion_5),
    6: ("Duhamel mild form", criterion_6),
    7: ("estimate harness", criterion_7),
    8: ("combinatorics", criterion_8),
    9: ("determinism", criterion_9),
}


def _line(num, ok, detail):
    return f"criterion {num} {'PASS' if ok else 'FAIL'}: {CRITERIA[num][0]}: {detail}"


@pytest.mark.slow
@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num, capsys):
    ok, detail = CRITERIA[num][1]()
    line = _line(num, ok, detail)
    RESULTS[num] = line
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for num in sorted(CRITERIA):
        ok, detail = CRITERIA[num][1]()
        print(_line(num, ok, detail), flush=True)
        failed += not ok
    sys.exit(1 if failed else 0)
