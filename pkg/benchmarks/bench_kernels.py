"""Compare the numba kernels with their numpy/scipy fallbacks.

    python3 benchmarks/bench_kernels.py [--sizes 256 1024 4096] [--repeat 5]

Each kernel is timed on both paths for the same inputs; the outputs are
compared so the speedup column is only printed for matching results.
"""

import argparse
import time

import numpy as np

from cssrad import kernels
from cssrad.radial import RadialGrid


def best_of(fn, repeat):
    fn()  # warm-up (triggers JIT compilation)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(n, steps):
    grid = RadialGrid(n, 16.0)
    r, w, c = grid.nodes, grid.weights, grid.half_cell
    lo, di, up = grid.laplacian_bands
    rho = np.exp(-(r**2))
    phi0 = np.exp(-(r**2) / 2).astype(np.complex128)
    dt = 1e-3
    a = 0.5j * dt
    solvers = {flag: kernels.TridiagonalSolver(-a * lo, 1 - a * di, -a * up, use_numba=flag) for flag in (True, False)}
    rhs = np.random.default_rng(0).standard_normal((n, 8)) + 0j

    def strang(flag):
        phi = phi0.copy()
        kernels.strang_steps(phi, steps, dt, -1.0, w, r, c, lo, di, up, solvers[flag])
        return phi

    return {
        "tridiagonal solve (8 rhs)": (lambda: solvers[True].solve(rhs), lambda: solvers[False].solve(rhs)),
        "gauge fields": (lambda: kernels._gauge_fields_nb(rho, rho, w, r, c),
                         lambda: kernels._gauge_fields_np(rho, rho, w, r, c)),
        f"strang x{steps}": (lambda: strang(True), lambda: strang(False)),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    print(f"{'kernel':28s} {'n':>6s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for n in args.sizes:
        for name, (fast, slow) in cases(n, args.steps).items():
            a, b = fast(), slow()
            same = all(np.allclose(x, y, rtol=1e-10, atol=1e-12) for x, y in
                       zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)))
            tf, ts = best_of(fast, args.repeat), best_of(slow, args.repeat)
            speed = f"{ts / tf:7.1f}x" if same else "MISMATCH"
            print(f"{name:28s} {n:6d} {1e3 * tf:11.3f} {1e3 * ts:11.3f} {speed:>8s}")


if __name__ == "__main__":
    main()
