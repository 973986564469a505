"""Hot loops: tridiagonal solves, gauge quadratures, fused split steps.

Every kernel has a numba version (``*_nb``) and a numpy/scipy version
(``*_np``). The public names point at one or the other depending on
:data:`cssrad._backend.USE_NUMBA`; tests and the benchmark call both.
"""

import numpy as np
from scipy.linalg import solve_banded

from ._backend import USE_NUMBA, njit


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a tridiagonal factorization hits a zero pivot."""


# --------------------------------------------------------------------------
# tridiagonal systems
#
# Convention: ``lower[i] = A[i+1, i]``, ``upper[i] = A[i, i+1]``, both length n-1.


@njit(cache=True)
def _thomas_factor_nb(lower, diag, upper):
    n = diag.shape[0]
    cp = np.zeros(n, dtype=np.complex128)
    inv = np.zeros(n, dtype=np.complex128)
    den = diag[0]
    if den == 0:
        return cp, inv, 0
    inv[0] = 1.0 / den
    if n > 1:
        cp[0] = upper[0] * inv[0]
    for i in range(1, n):
        den = diag[i] - lower[i - 1] * cp[i - 1]
        if den == 0 or not np.isfinite(den.real) or not np.isfinite(den.imag):
            return cp, inv, i
        inv[i] = 1.0 / den
        if i < n - 1:
            cp[i] = upper[i] * inv[i]
    return cp, inv, -1


@njit(cache=True)
def _thomas_solve_nb(lower, cp, inv, rhs):
    # rhs is (n, m); solved column by column in place of a copy
    n, m = rhs.shape
    x = np.empty_like(rhs)
    for j in range(m):
        x[0, j] = rhs[0, j] * inv[0]
        for i in range(1, n):
            x[i, j] = (rhs[i, j] - lower[i - 1] * x[i - 1, j]) * inv[i]
        for i in range(n - 2, -1, -1):
            x[i, j] = x[i, j] - cp[i] * x[i + 1, j]
    return x


def _banded(lower, diag, upper):
    n = diag.shape[0]
    ab = np.zeros((3, n), dtype=np.complex128)
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return ab


class TridiagonalSolver:
    """Direct solver for a fixed complex tridiagonal matrix.

    The factorization is computed once; :meth:`solve` accepts a vector or an
    ``(n, m)`` block of right-hand sides.
    """

    def __init__(self, lower, diag, upper, use_numba=None):
        self.lower = np.ascontiguousarray(lower, dtype=np.complex128)
        self.diag = np.ascontiguousarray(diag, dtype=np.complex128)
        self.upper = np.ascontiguousarray(upper, dtype=np.complex128)
        self.n = self.diag.shape[0]
        self.use_numba = USE_NUMBA if use_numba is None else use_numba
        if self.use_numba:
            self._cp, self._inv, bad = _thomas_factor_nb(self.lower, self.diag, self.upper)
            if bad >= 0:
                raise SingularSystemError(f"zero pivot at row {bad} of tridiagonal system")
        else:
            self._ab = _banded(self.lower, self.diag, self.upper)
            self.solve(np.ones(self.n))

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=np.complex128)
        vec = rhs.ndim == 1
        block = rhs.reshape(self.n, -1)
        if self.use_numba:
            out = _thomas_solve_nb(self.lower, self._cp, self._inv, np.ascontiguousarray(block))
        else:
            try:
                out = solve_banded((1, 1), self._ab, block, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise SingularSystemError(str(exc)) from exc
        return out[:, 0] if vec else out.reshape(rhs.shape)


def tridiag_matvec(lower, diag, upper, x):
    """``A @ x`` along axis 0 for the tridiagonal ``A``; x may be (n,) or (n, m)."""
    x = np.asarray(x)
    d = diag.reshape((-1,) + (1,) * (x.ndim - 1))
    lo = lower.reshape((-1,) + (1,) * (x.ndim - 1))
    up = upper.reshape((-1,) + (1,) * (x.ndim - 1))
    out = d * x
    out[:-1] += up * x[1:]
    out[1:] += lo * x[:-1]
    return out


# --------------------------------------------------------------------------
# gauge quadratures
#
# A_theta_i = -1/2 (sum_{k<i} w_k rho1_k + c_i rho1_i)
# A_0_j    = -(sum_{i>j} t_i + (c_j / w_j) t_j),  t_i = w_i A_theta_i rho2_i / r_i^2
#
# The A_0 rule is the transpose of the A_theta rule, which makes the diagonal
# potential the exact gradient of the discrete gauge energy.


@njit(cache=True)
def _gauge_fields_nb(rho1, rho2, w, r, cself):
    n = rho1.shape[0]
    at1 = np.empty(n)
    at2 = np.empty(n)
    a0 = np.empty(n)
    s1 = 0.0
    s2 = 0.0
    for i in range(n):
        at1[i] = -0.5 * (s1 + cself[i] * rho1[i])
        at2[i] = -0.5 * (s2 + cself[i] * rho2[i])
        s1 += w[i] * rho1[i]
        s2 += w[i] * rho2[i]
    tail = 0.0
    for j in range(n - 1, -1, -1):
        t = w[j] * at1[j] * rho2[j] / (r[j] * r[j])
        a0[j] = -(tail + cself[j] / w[j] * t)
        tail += t
    return at1, at2, a0


def _gauge_fields_np(rho1, rho2, w, r, cself):
    def prefix(rho):
        run = np.concatenate(([0.0], np.cumsum(w * rho)[:-1]))
        return -0.5 * (run + cself * rho)

    at1 = prefix(rho1)
    at2 = prefix(rho2)
    t = w * at1 * rho2 / r**2
    tail = np.concatenate((np.cumsum(t[::-1])[::-1][1:], [0.0]))
    a0 = -(tail + cself / w * t)
    return at1, at2, a0


# --------------------------------------------------------------------------
# fused Strang step for (i d_t + Lap) phi = V(|phi|^2) phi
#
#   V = A_0 + A_theta^2 / r^2 - g |phi|^2
#   phi <- exp(-i dt/2 V) phi ; CN(dt) ; exp(-i dt/2 V) phi
#
# CN: (I - i a L) phi_new = (I + i a L) phi with a = dt / 2.


@njit(cache=True)
def _potential_nb(phi, g, w, r, cself):
    n = phi.shape[0]
    rho = np.empty(n)
    for i in range(n):
        rho[i] = phi[i].real * phi[i].real + phi[i].imag * phi[i].imag
    at, _, a0 = _gauge_fields_nb(rho, rho, w, r, cself)
    v = np.empty(n)
    for i in range(n):
        v[i] = a0[i] + at[i] * at[i] / (r[i] * r[i]) - g * rho[i]
    return v


@njit(cache=True)
def _strang_steps_nb(phi, nsteps, dt, g, w, r, cself, llo, ldi, lup, alo, cp, inv, growth_tol):
    n = phi.shape[0]
    a = 0.5 * dt
    rhs = np.empty(n, dtype=np.complex128)
    q0 = 0.0
    for i in range(n):
        q0 += w[i] * (phi[i].real ** 2 + phi[i].imag ** 2)
    for step in range(nsteps):
        v = _potential_nb(phi, g, w, r, cself)
        for i in range(n):
            phi[i] = phi[i] * np.exp(-1j * a * v[i])
        for i in range(n):
            acc = ldi[i] * phi[i]
            if i > 0:
                acc += llo[i - 1] * phi[i - 1]
            if i < n - 1:
                acc += lup[i] * phi[i + 1]
            rhs[i] = phi[i] + 1j * a * acc
        phi[0] = rhs[0] * inv[0]
        for i in range(1, n):
            phi[i] = (rhs[i] - alo[i - 1] * phi[i - 1]) * inv[i]
        for i in range(n - 2, -1, -1):
            phi[i] = phi[i] - cp[i] * phi[i + 1]
        v = _potential_nb(phi, g, w, r, cself)
        q1 = 0.0
        finite = True
        for i in range(n):
            phi[i] = phi[i] * np.exp(-1j * a * v[i])
            q1 += w[i] * (phi[i].real ** 2 + phi[i].imag ** 2)
            if not (np.isfinite(phi[i].real) and np.isfinite(phi[i].imag)):
                finite = False
        if not finite or not np.isfinite(q1) or q1 > q0 * (1.0 + growth_tol):
            return step
        q0 = q1
    return -1


def _potential_np(phi, g, w, r, cself):
    rho = phi.real**2 + phi.imag**2
    at, _, a0 = _gauge_fields_np(rho, rho, w, r, cself)
    return a0 + at**2 / r**2 - g * rho


def _strang_steps_np(phi, nsteps, dt, g, w, r, cself, llo, ldi, lup, ab, growth_tol):
    a = 0.5 * dt
    q0 = np.sum(w * np.abs(phi) ** 2)
    for step in range(nsteps):
        phi *= np.exp(-1j * a * _potential_np(phi, g, w, r, cself))
        rhs = phi + 1j * a * tridiag_matvec(llo, ldi, lup, phi)
        phi[:] = solve_banded((1, 1), ab, rhs, check_finite=False)
        phi *= np.exp(-1j * a * _potential_np(phi, g, w, r, cself))
        q1 = np.sum(w * np.abs(phi) ** 2)
        if not np.all(np.isfinite(phi)) or not np.isfinite(q1) or q1 > q0 * (1.0 + growth_tol):
            return step
        q0 = q1
    return -1


def strang_steps(phi, nsteps, dt, g, w, r, cself, llo, ldi, lup, solver, growth_tol=0.01):
    """Advance ``phi`` in place by ``nsteps`` split steps.

    ``solver`` is the :class:`TridiagonalSolver` for ``I - i dt/2 L``. Returns
    the index of the step that went non-finite or grew the charge by more than
    ``growth_tol``, or -1.
    """
    if solver.use_numba:
        return _strang_steps_nb(phi, nsteps, dt, g, w, r, cself, llo, ldi, lup,
                                solver.lower, solver._cp, solver._inv, growth_tol)
    return _strang_steps_np(phi, nsteps, dt, g, w, r, cself, llo, ldi, lup, solver._ab, growth_tol)


if USE_NUMBA:
    gauge_fields = _gauge_fields_nb
    potential = _potential_nb
else:
    gauge_fields = _gauge_fields_np
    potential = _potential_np
