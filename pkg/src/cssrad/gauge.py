"""Self-generated gauge potentials of a radial density.

For densities ``rho1, rho2`` on a :class:`~cssrad.radial.RadialGrid`:

    A_theta(r)        = -1/2 int_0^r rho1(s) s ds
    A_0(r)            = -int_r^R A_theta^(rho1)(s) rho2(s) ds / s
    a_{rho1,rho2}(r)  = A_0(r) + A_theta^(rho1)(r) A_theta^(rho2)(r) / r^2

Running integrals use the midpoint weights of :func:`cssrad.radial.integrate`
for whole cells and the exact half-cell weight ``h r_i / 2 - h^2 / 8`` for the
cell containing the evaluation node. The ``A_0`` sum is the transpose of the
``A_theta`` sum, so the diagonal potential is the exact gradient of the
discrete gauge energy and the solver conserves it to second order in dt.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .radial import RadialField, RadialGrid, _same_grid


@dataclass(frozen=True)
class GaugeFields:
    grid: RadialGrid
    a_theta: np.ndarray
    a_zero: np.ndarray
    a_combined: np.ndarray

    def as_fields(self):
        return tuple(RadialField(self.grid, v) for v in (self.a_theta, self.a_zero, self.a_combined))


def _real(f, name):
    v = np.asarray(f.values)
    if np.iscomplexobj(v):
        if np.any(v.imag != 0):
            raise ValueError(f"{name} must be real-valued")
        v = v.real
    return np.ascontiguousarray(v, dtype=float)


def _fields(rho1, rho2):
    grid = _same_grid(rho1, rho2)
    r1, r2 = _real(rho1, "rho1"), _real(rho2, "rho2")
    at1, at2, a0 = kernels.gauge_fields(r1, r2, grid.weights, grid.nodes, grid.half_cell)
    return grid, at1, at2, a0


def compute_a_theta(rho):
    """``A_theta = -1/2 int_0^r rho s ds`` at every node."""
    grid, at, _, _ = _fields(rho, rho)
    return RadialField(grid, at, rho.time)


def compute_a_zero(rho1, rho2=None):
    """``A_0^(rho1, rho2) = -int_r^R A_theta^(rho1) rho2 ds/s``; diagonal if rho2 is None."""
    rho2 = rho1 if rho2 is None else rho2
    grid, _, _, a0 = _fields(rho1, rho2)
    return RadialField(grid, a0, rho1.time)


def compute_a_combined(rho1, rho2=None):
    """``a = A_0^(rho1,rho2) + A_theta^(rho1) A_theta^(rho2) / r^2``."""
    rho2 = rho1 if rho2 is None else rho2
    grid, at1, at2, a0 = _fields(rho1, rho2)
    return RadialField(grid, a0 + at1 * at2 / grid.nodes**2, rho1.time)


def gauge_fields(rho1, rho2=None):
    """All three potentials in one pass."""
    rho2 = rho1 if rho2 is None else rho2
    grid, at1, at2, a0 = _fields(rho1, rho2)
    return GaugeFields(grid, at1, a0, a0 + at1 * at2 / grid.nodes**2)


def a_zero_direct(rho):
    """Diagonal ``A_0 = 1/2 int_r^R rho(s) (int_0^s rho(u) u du) ds / s`` by dense double sum.

    Independent of the running-sum kernels: both integrals are written as
    explicit quadrature matrices and applied with matrix products. Memory is
    O(n^2), so this is meant for cross-checks.
    """
    grid = rho.grid
    v = _real(rho, "rho")
    w, c, r = grid.weights, grid.half_cell, grid.nodes
    n = grid.n
    lower = np.tril(np.broadcast_to(w, (n, n)), k=-1) + np.diag(c)
    inner = lower @ v
    upper = np.triu(np.broadcast_to(w, (n, n)), k=1) + np.diag(c)
    return RadialField(grid, 0.5 * upper @ (v * inner / r**2), rho.time)


# --------------------------------------------------------------------------
# CSV table I/O


def grid_from_nodes(r, rtol=1e-9):
    """Recover the cell-centred grid whose nodes are ``r``."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("need at least two radial nodes")
    h = 2.0 * r[0]
    grid = RadialGrid(r.size, h * r.size)
    if not np.allclose(r, grid.nodes, rtol=rtol, atol=rtol * h):
        raise ValueError("nodes are not a uniform cell-centred grid r_i = (i - 1/2) h")
    return grid


def read_density_csv(path):
    """Read a two-column ``r, rho`` CSV (a header line is allowed)."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows or lineno > 1:
                    raise ValueError(f"{path}:{lineno}: expected two numeric columns r, rho")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    grid = grid_from_nodes(data[:, 0])
    return RadialField(grid, data[:, 1])


def write_gauge_csv(path, fields):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["r", "a_theta", "a_zero", "a"])
        for row in zip(fields.grid.nodes, fields.a_theta, fields.a_zero, fields.a_combined):
            out.writerow([f"{x:.17g}" for x in row])
