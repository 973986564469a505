"""Marginal density kernels, the collision operator and hierarchy residuals.

A :class:`DensityKernel` of order k stores ``gamma(r_1..r_k; r'_1..r'_k)`` as a
2k-index tensor on the nodes of a (coarse) radial grid, unprimed axes first.
Operators act on kernels as integral operators against the 2 pi r dr measure.

Residual conventions: for ``phi`` solving

    i d_t phi = -Lap phi + (a - g |phi|^2) phi,

the factorized ``gamma^(k) = prod phi(r_j) conj(phi(r'_j))`` satisfies

    i d_t gamma + sum_j [Lap_j, gamma] = sum_j [a(r_j), gamma] - g sum_j B_{j,k+1} gamma^(k+1)

and :func:`hierarchy_residual` returns the norm of LHS - RHS.
"""

import string
from dataclasses import dataclass, field

import numpy as np

from .gauge import compute_a_combined
from .radial import TWO_PI, RadialField, apply_laplacian, cn_apply

MAX_K = 3
MAX_ENTRIES = 2**26


def _check_size(n, k):
    if n ** (2 * k) > MAX_ENTRIES:
        raise MemoryError(f"a k={k} kernel on {n} nodes has {n ** (2 * k)} entries (cap {MAX_ENTRIES}); "
                          "use a coarser kernel grid")


class DensityKernel:
    """Discretised k-particle kernel.

    ``factor`` holds the one-particle samples of a factorized kernel. Such a
    kernel may be created lazily (``values=None``); the tensor is then built on
    first access, and :func:`collision` uses the closed form instead.
    """

    def __init__(self, k, grid, values=None, factor=None):
        if not 1 <= k <= MAX_K:
            raise ValueError(f"k must be in 1..{MAX_K}, got {k}")
        self.k = int(k)
        self.grid = grid
        self.factor = None if factor is None else np.asarray(factor, dtype=np.complex128)
        if values is None and self.factor is None:
            raise ValueError("need values or a factor")
        if values is not None:
            values = np.asarray(values, dtype=np.complex128)
            if values.shape != (grid.n,) * (2 * k):
                raise ValueError(f"expected shape {(grid.n,) * (2 * k)}, got {values.shape}")
        self._values = values

    @property
    def values(self):
        if self._values is None:
            _check_size(self.grid.n, self.k)
            phi = self.factor
            t = np.ones((), dtype=np.complex128)
            for _ in range(self.k):
                t = np.multiply.outer(t, phi)
            for _ in range(self.k):
                t = np.multiply.outer(t, phi.conj())
            self._values = t
        return self._values

    @property
    def is_lazy(self):
        return self._values is None

    def __mul__(self, c):
        return DensityKernel(self.k, self.grid, c * self.values)

    __rmul__ = __mul__

    def trace(self):
        """``(2 pi)^k sum prod w gamma(r; r)``."""
        if self.factor is not None and self._values is None:
            return (TWO_PI * np.sum(self.grid.weights * np.abs(self.factor) ** 2)) ** self.k
        m = self.grid.n ** self.k
        d = self.values.reshape(m, m).diagonal().reshape((self.grid.n,) * self.k)
        ww = TWO_PI * self.grid.weights
        for _ in range(self.k):
            d = d @ ww
        return complex(d)

    def adjoint_swap(self):
        """``conj(gamma(r'; r))``: the kernel of the adjoint operator."""
        k = self.k
        perm = list(range(k, 2 * k)) + list(range(k))
        return DensityKernel(k, self.grid, np.conj(np.transpose(self.values, perm)))

    def permuted(self, perm):
        """Apply the same particle permutation to primed and unprimed indices."""
        k = self.k
        perm = list(perm)
        if sorted(perm) != list(range(k)):
            raise ValueError(f"not a permutation of 0..{k - 1}: {perm}")
        axes = perm + [k + p for p in perm]
        return DensityKernel(k, self.grid, np.transpose(self.values, axes))

    def is_hermitian(self, tol=1e-12):
        return _close(self.values, self.adjoint_swap().values, tol)

    def is_symmetric(self, tol=1e-12):
        from itertools import permutations

        return all(_close(self.values, self.permuted(p).values, tol) for p in permutations(range(self.k)))


def _close(a, b, tol):
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    return bool(np.max(np.abs(a - b)) <= tol * scale) if a.size else True


def hs_norm(gamma_or_values, grid=None, k=None):
    """Hilbert-Schmidt norm with the (2 pi r dr)^{2k} product measure."""
    if isinstance(gamma_or_values, DensityKernel):
        vals, grid, k = gamma_or_values.values, gamma_or_values.grid, gamma_or_values.k
    else:
        vals = gamma_or_values
    ww = TWO_PI * grid.weights
    a = np.abs(vals) ** 2
    for _ in range(2 * k):
        a = a @ ww
    return float(np.sqrt(a))


# --------------------------------------------------------------------------
# construction and contraction


def restrict(phi, stride=1):
    """Sample ``phi`` on the grid keeping every ``stride``-th node (nested centres)."""
    if stride == 1:
        return phi
    coarse = phi.grid.subsample(stride)
    return RadialField(coarse, np.asarray(phi.values)[stride // 2::stride], phi.time)


def factorized(phi, k, lazy=False):
    """``gamma^(k) = prod_j phi(r_j) conj(phi(r'_j))``."""
    if not 1 <= k <= MAX_K:
        raise ValueError(f"k must be in 1..{MAX_K}, got {k}")
    g = DensityKernel(k, phi.grid, factor=phi.values)
    if not lazy:
        g.values
    return g


def partial_trace(gamma):
    """``Tr_{k+1}``: contract the last unprimed/primed pair against 2 pi w."""
    k = gamma.k
    if k < 2:
        raise ValueError("partial_trace needs a kernel with k >= 2")
    if gamma.is_lazy:
        c = TWO_PI * np.sum(gamma.grid.weights * np.abs(gamma.factor) ** 2)
        out = factorized(RadialField(gamma.grid, gamma.factor), k - 1)
        return DensityKernel(k - 1, gamma.grid, c * out.values, gamma.factor)
    d = np.diagonal(gamma.values, axis1=k - 1, axis2=2 * k - 1)
    return DensityKernel(k - 1, gamma.grid, d @ (TWO_PI * gamma.grid.weights))


def _reinsert(values, k1, j, primed):
    # values has 2*k1 axes; return the k = k1 - 1 kernel with particle k1
    # evaluated at the (primed or unprimed) position of particle j
    letters = string.ascii_letters
    k = k1 - 1
    unp = list(letters[:k1])
    pri = list(letters[k1:2 * k1])
    target = pri[j - 1] if primed else unp[j - 1]
    unp[k] = target
    pri[k] = target
    spec = "".join(unp + pri) + "->" + "".join(unp[:k] + pri[:k])
    return np.einsum(spec, values)


def collision(gamma, j):
    """``B_{j,k+1} gamma^(k+1) = B^+ - B^-`` by re-insertion of the last particle.

    ``B^+`` evaluates particle k+1 at ``r_j`` on both sides, ``B^-`` at ``r'_j``.
    ``j`` is 1-based and must satisfy ``1 <= j <= k``.
    """
    k1 = gamma.k
    k = k1 - 1
    if k < 1:
        raise ValueError("collision needs a kernel with at least two particles")
    if not 1 <= j <= k:
        raise IndexError(f"collision index j={j} out of range 1..{k}")
    if gamma.is_lazy:
        phi = gamma.factor
        rho = np.abs(phi) ** 2
        base = factorized(RadialField(gamma.grid, phi), k).values
        shape_u = [1] * (2 * k)
        shape_u[j - 1] = -1
        shape_p = [1] * (2 * k)
        shape_p[k + j - 1] = -1
        return DensityKernel(k, gamma.grid, (rho.reshape(shape_u) - rho.reshape(shape_p)) * base)
    v = gamma.values
    return DensityKernel(k, gamma.grid, _reinsert(v, k1, j, False) - _reinsert(v, k1, j, True))


def collision_closed_form(phi):
    """``|phi(r)|^2 phi(r) conj(phi(r')) - phi(r) |phi(r')|^2 conj(phi(r'))``."""
    p = np.asarray(phi.values)
    rho = np.abs(p) ** 2
    return np.outer(rho * p, p.conj()) - np.outer(p, rho * p.conj())


# --------------------------------------------------------------------------
# residuals


@dataclass
class ResidualReport:
    k: int
    times: list
    norms: list
    scale: float
    extra: dict = field(default_factory=dict)

    @property
    def max_norm(self):
        return max(self.norms) if self.norms else 0.0

    def to_dict(self):
        return {"k": self.k, "times": list(map(float, self.times)), "norms": list(map(float, self.norms)),
                "max_norm": float(self.max_norm), "scale": float(self.scale), **self.extra}


def _snapshots(traj, stride):
    return [restrict(f, stride) for f in traj.fields]


def _uniform_spacing(traj):
    t = np.asarray(traj.times, dtype=float)
    if t.size < 2:
        return 0.0
    dtm = np.diff(t)
    if np.max(np.abs(dtm - dtm[0])) > 1e-9 * max(abs(dtm[0]), 1e-300) + 1e-12:
        raise ValueError("snapshots are not uniformly spaced")
    return float(dtm[0])


def _potential(phi, g):
    rho = phi.density
    return compute_a_combined(rho).values - g * rho.values


def _bcast(vec, ndim, axis):
    shape = [1] * ndim
    shape[axis] = -1
    return vec.reshape(shape)


def pde_residual(traj, m, stride=1):
    """``i D_t phi + Lap phi - (a - g|phi|^2) phi`` at interior snapshot m."""
    snaps = _snapshots(traj, stride)
    tau = _uniform_spacing(traj)
    if not 0 < m < len(snaps) - 1:
        raise IndexError(f"snapshot {m} has no centred neighbours")
    phi = snaps[m]
    dphi = (snaps[m + 1].values - snaps[m - 1].values) / (2.0 * tau)
    lap = apply_laplacian(phi.grid, phi.values)
    return 1j * dphi + lap - _potential(phi, traj.g) * phi.values


def _residual_at(snaps, m, tau, k, g, time_derivative):
    phi = snaps[m]
    grid = phi.grid
    nd = 2 * k
    if time_derivative == "product":
        dphi = (snaps[m + 1].values - snaps[m - 1].values) / (2.0 * tau)
        p = phi.values
        res = np.zeros((grid.n,) * nd, dtype=np.complex128)
        for axis in range(nd):
            t = np.ones((), dtype=np.complex128)
            for ax in range(nd):
                if ax < k:
                    fac = dphi if ax == axis else p
                else:
                    fac = np.conj(dphi) if ax == axis else np.conj(p)
                t = np.multiply.outer(t, fac)
            res += 1j * t
            del t
    else:
        res = factorized(snaps[m + 1], k).values.copy()
        res -= factorized(snaps[m - 1], k).values
        res *= 1j / (2.0 * tau)
    gam = factorized(phi, k).values
    v_a = compute_a_combined(phi.density).values
    for j in range(k):
        res += apply_laplacian(grid, gam, axis=j)
        res -= apply_laplacian(grid, gam, axis=k + j)
        res -= (_bcast(v_a, nd, j) - _bcast(v_a, nd, k + j)) * gam
    nxt = factorized(phi, k + 1, lazy=True)
    for j in range(1, k + 1):
        res += g * collision(nxt, j).values
    return res


def hierarchy_residual(traj, k, g=None, stride=1, indices=None, time_derivative="centered"):
    """Norm of the hierarchy residual of the factorized kernels of ``traj``.

    ``indices`` selects interior snapshots (default: all). ``stride`` restricts
    snapshots to a coarser nested grid first. With ``time_derivative='product'``
    the time derivative of gamma is formed from centred differences of phi,
    which makes the k = 1 residual equal ``e conj(phi) - phi conj(e)`` for the
    PDE residual e.
    """
    if k not in (1, 2):
        raise ValueError(f"hierarchy_residual supports k = 1, 2; got {k}")
    if time_derivative not in ("centered", "product"):
        raise ValueError(f"unknown time_derivative {time_derivative!r}")
    if len(traj) < 3:
        raise ValueError("hierarchy_residual needs at least 3 snapshots")
    g = traj.g if g is None else g
    tau = _uniform_spacing(traj)
    snaps = _snapshots(traj, stride)
    _check_size(snaps[0].grid.n, k)
    if indices is None:
        indices = range(1, len(snaps) - 1)
    times, norms = [], []
    for m in indices:
        if not 0 < m < len(snaps) - 1:
            raise IndexError(f"snapshot {m} has no centred neighbours")
        res = _residual_at(snaps, m, tau, k, g, time_derivative)
        times.append(snaps[m].time)
        norms.append(hs_norm(res, snaps[m].grid, k))
        del res
    scale = max(hs_norm(factorized(snaps[m], k)) for m in indices) if norms else 0.0
    return ResidualReport(k, times, norms, scale, {"stride": stride, "spacing": tau})


def duhamel_check(traj, g=None, stride=1):
    """Defect of the k = 1 mild form along the trajectory.

    ``U(tau)`` is ``record_every`` Crank-Nicolson steps of size ``traj.dt`` on
    the unprimed index and their conjugates on the primed index, so that the
    linear part of the defect is exactly that of the solver. The Duhamel
    integral uses the trapezoid rule on the snapshots.
    """
    g = traj.g if g is None else g
    tau = _uniform_spacing(traj)
    snaps = _snapshots(traj, stride)
    grid = snaps[0].grid
    steps = traj.record_every
    dt = traj.dt

    def prop(arr):
        arr = cn_apply(grid, arr, dt, steps, axis=0)
        return cn_apply(grid, arr, -dt, steps, axis=1)

    def forcing(phi):
        gam = np.outer(phi.values, np.conj(phi.values))
        v = _potential(phi, g)
        return (v[:, None] - v[None, :]) * gam

    gam0 = np.outer(snaps[0].values, np.conj(snaps[0].values))
    free = gam0
    f_prev = forcing(snaps[0])
    integral = np.zeros_like(gam0)
    times, norms = [snaps[0].time], [0.0]
    for m in range(1, len(snaps)):
        f_m = forcing(snaps[m])
        integral = prop(integral + 0.5 * tau * f_prev) + 0.5 * tau * f_m
        free = prop(free)
        gam = np.outer(snaps[m].values, np.conj(snaps[m].values))
        defect = gam - (free - 1j * integral)
        times.append(snaps[m].time)
        norms.append(hs_norm(defect, grid, 1))
        f_prev = f_m
    return ResidualReport(1, times, norms, hs_norm(gam0, grid, 1), {"stride": stride, "spacing": tau})
