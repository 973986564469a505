"""Randomised probes of weighted Hardy, gauge-field and trilinear estimates.

Every probe evaluates ``LHS / RHS`` for each ensemble member (or pair, or
triple) and reports the largest ratio. A finite sampled ratio cannot prove an
inequality; what is checked is that the maximum stays finite and moves by at
most 10% when the grid is refined ``n -> 2n`` and the time samples doubled.

All L^p norms use the planar measure ``2 pi r dr``; ``L^inf`` is the nodal
maximum. Homogeneous Sobolev norms come from :mod:`cssrad.radial`.

Pairs and triples are formed cyclically from consecutive members:
``(i, i+1)`` and ``(i, i+1, i+2)`` modulo the ensemble size.
"""

import math
from dataclasses import asdict, dataclass, field
from itertools import permutations

import numpy as np

from . import kernels
from .radial import (
    TWO_PI,
    RadialField,
    RadialGrid,
    _same_grid,
    free_propagate,
    sobolev_norms_batch,
    spectral_transform,
)

HARNESS_N = 512
HARNESS_R = 16.0
HARNESS_TIME_SAMPLES = 64
REFINEMENT_TOL = 0.10

STATEMENT = ("sampled ratio over a documented ensemble; finite and refinement-stable "
             "maxima are consistent with the bound but do not prove it")


# --------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class Ensemble:
    """Random Gaussians ``A exp(-a (r - c)^2 + i b r^2)``.

    ``a ~ U[0.5, 8]``, ``c ~ U[0, 2]``, ``|A| ~ U[0.5, 2]`` with uniform phase,
    chirp ``b ~ U[-2, 2]`` (0 if ``chirp`` is off), and a time offset fraction
    ``u ~ U[0, 1]`` used by the trilinear probes. ``members`` appends explicit
    parameter dicts; ``kind='indicator'`` with a ``radius`` gives a disc.
    """

    seed: int = 0
    count: int = 100
    chirp: bool = True
    members: tuple = ()

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        object.__setattr__(self, "members", tuple(dict(m) for m in self.members))

    def parameters(self):
        rng = np.random.default_rng(self.seed)
        out = []
        for _ in range(self.count):
            a = rng.uniform(0.5, 8.0)
            c = rng.uniform(0.0, 2.0)
            mod = rng.uniform(0.5, 2.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            b = rng.uniform(-2.0, 2.0)
            u = rng.uniform(0.0, 1.0)
            out.append({"kind": "gaussian", "a": a, "c": c, "modulus": mod, "phase": phase,
                        "b": b if self.chirp else 0.0, "offset": u})
        for m in self.members:
            p = {"kind": "gaussian", "a": 1.0, "c": 0.0, "modulus": 1.0, "phase": 0.0, "b": 0.0, "offset": 0.0}
            p.update(m)
            out.append(p)
        return out

    def __len__(self):
        return self.count + len(self.members)

    def samples(self, grid):
        """``(len(self), n)`` complex array of members on ``grid``."""
        r = grid.nodes
        rows = []
        for p in self.parameters():
            amp = p["modulus"] * np.exp(1j * p["phase"])
            if p["kind"] == "indicator":
                rows.append(amp * np.where(r <= p["radius"], 1.0, 0.0))
            elif p["kind"] == "gaussian":
                rows.append(amp * np.exp(-p["a"] * (r - p["c"]) ** 2 + 1j * p["b"] * r**2))
            else:
                raise ValueError(f"unknown member kind {p['kind']!r}")
        return np.array(rows, dtype=np.complex128).reshape(len(rows), grid.n)


# --------------------------------------------------------------------------
# reports


@dataclass
class RatioReport:
    estimate: str
    lhs: list
    rhs: list
    ratios: list
    skipped: list
    max_ratio: float
    argmax: int
    argmax_params: dict
    settings: dict = field(default_factory=dict)
    refined_max_ratio: float = None
    refinement_change: float = None
    refinement_stable: bool = None
    statement: str = STATEMENT

    def to_dict(self):
        return asdict(self)

    @property
    def finite(self):
        return math.isfinite(self.max_ratio)


def _report(estimate, lhs, rhs, params, settings, groups=None):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    ok = (rhs > 0) & np.isfinite(rhs) & np.isfinite(lhs)
    ratios = np.full(lhs.shape, np.nan)
    ratios[ok] = lhs[ok] / rhs[ok]
    skipped = [int(i) for i in np.flatnonzero(~ok)]
    if ok.any():
        k = int(np.nanargmax(ratios))
        mx = float(ratios[k])
    else:
        k, mx = -1, 0.0
    if k < 0:
        arg = {}
    elif groups is None:
        arg = dict(params[k])
    else:
        arg = {"members": [int(i) for i in groups[k]], "params": [dict(params[i]) for i in groups[k]]}
    return RatioReport(
        estimate,
        [float(x) for x in lhs],
        [float(x) for x in rhs],
        [None if not math.isfinite(x) else float(x) for x in ratios],
        skipped,
        mx,
        k,
        arg,
        dict(settings),
    )


# --------------------------------------------------------------------------
# norms on stacks of samples (rows)


def _lp_rows(grid, vals, p):
    a = np.abs(vals)
    if np.isinf(p):
        return a.max(axis=-1)
    return (TWO_PI * (a**p) @ grid.weights) ** (1.0 / p)


def _hs_rows(grid, vals, s):
    return sobolev_norms_batch(grid, np.asarray(vals).T, s)


# --------------------------------------------------------------------------
# Hardy-type operators

HARDY_OPS = ("inv_dr", "inv_rdr", "inv_rn_bar")


def _suffix_exclusive(x):
    s = np.cumsum(x[..., ::-1], axis=-1)[..., ::-1]
    return np.concatenate((s[..., 1:], np.zeros(x.shape[:-1] + (1,), dtype=s.dtype)), axis=-1)


def _prefix_exclusive(x):
    s = np.cumsum(x, axis=-1)
    return np.concatenate((np.zeros(x.shape[:-1] + (1,), dtype=s.dtype), s[..., :-1]), axis=-1)


def hardy_values(op_id, n, grid, vals):
    """Hardy operators on the rows of ``vals``, treating samples as cell-wise constant."""
    vals = np.asarray(vals)
    r, b, h = grid.nodes, grid.edges, grid.h
    inner = np.concatenate(([0.0], b[:-1]))
    if op_id == "inv_dr":
        return -(vals * (b - r) + _suffix_exclusive(vals * h))
    if op_id == "inv_rdr":
        cell = np.log(b[1:] / inner[1:])
        cell = np.concatenate(([np.inf], cell))  # never used: suffix starts at k > j >= 1
        tail = _suffix_exclusive(np.where(np.isinf(cell), 0.0, cell) * vals)
        return -(vals * np.log(b / r) + tail)
    if op_id == "inv_rn_bar":
        if n < 0:
            raise ValueError(f"inv_rn_bar needs n >= 0, got {n}")
        e = n + 1.0
        full = (b**e - inner**e) / e
        half = (r**e - inner**e) / e
        return _prefix_exclusive(vals * full) + vals * half
    raise ValueError(f"unknown Hardy operator {op_id!r}; expected one of {HARDY_OPS}")


def hardy_apply(op_id, n, f):
    """``[d_r]^-1``, ``[r d_r]^-1`` or ``[r^-n dbar_r]^-1`` applied to ``f``.

    * ``inv_dr``:     ``-int_r^R f(s) ds``
    * ``inv_rdr``:    ``-int_r^R f(s) ds / s``
    * ``inv_rn_bar``: ``int_0^r f(s) s^n ds``

    Integrals are exact for the piecewise-constant interpolant of the samples.
    """
    return f.with_values(hardy_values(op_id, n, f.grid, f.values))


_HARDY_RANGES = {
    "inv_rdr": (lambda p: 1 <= p < np.inf, "the [r d_r]^-1 bound holds for 1 <= p < inf"),
    "inv_rn_bar": (lambda p: 1 < p <= np.inf, "the r^(-n-1) [r^-n dbar_r]^-1 bound holds for 1 < p <= inf"),
}


def _hardy_id(op_id, n, p):
    if op_id == "inv_dr":
        return "hardy_dr_l1_l2"
    if op_id == "inv_rdr":
        return f"hardy_rdr[p={_fmt(p)}]"
    return f"hardy_rn_bar[n={_fmt(n)},p={_fmt(p)}]"


def _fmt(x):
    if isinstance(x, float) and np.isinf(x):
        return "inf"
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.4g}"
    return str(x)


def hardy_ratio(op_id, n, p, ensemble, grid=None):
    """Sampled ratio for a Hardy-type bound.

    ``inv_rdr`` and ``inv_rn_bar`` compare L^p norms (the latter after the
    weight ``r^(-n-1)``); ``inv_dr`` compares the L^2 norm of the output with
    the L^1 norm of the input and accepts ``p in (None, 1)`` only.
    """
    grid = grid or RadialGrid(HARNESS_N, HARNESS_R)
    if op_id not in HARDY_OPS:
        raise ValueError(f"unknown Hardy operator {op_id!r}; expected one of {HARDY_OPS}")
    if op_id == "inv_dr":
        if p not in (None, 1):
            raise ValueError("the [d_r]^-1 bound maps L^1 to L^2 only; p must be 1")
    else:
        p = float(p)
        valid, msg = _HARDY_RANGES[op_id]
        if not valid(p):
            raise ValueError(f"p = {p} is outside the valid range: {msg}")
    vals = ensemble.samples(grid)
    out = hardy_values(op_id, n, grid, vals)
    if op_id == "inv_dr":
        lhs, rhs = _lp_rows(grid, out, 2), _lp_rows(grid, vals, 1)
    elif op_id == "inv_rdr":
        lhs, rhs = _lp_rows(grid, out, p), _lp_rows(grid, vals, p)
    else:
        lhs, rhs = _lp_rows(grid, out / grid.nodes ** (n + 1), p), _lp_rows(grid, vals, p)
    settings = {"op": op_id, "n": n, "p": p, "grid_n": grid.n, "r_max": grid.r_max,
                "seed": ensemble.seed, "count": len(ensemble)}
    return _report(_hardy_id(op_id, n, p), lhs, rhs, ensemble.parameters(), settings)


# --------------------------------------------------------------------------
# gauge bounds


def _gauge_rows(grid, rho1, rho2):
    at1, at2, a0 = kernels.gauge_fields(np.ascontiguousarray(rho1), np.ascontiguousarray(rho2),
                                        grid.weights, grid.nodes, grid.half_cell)
    return at1, at2, a0


def _pairs(m, k):
    return [tuple((i + j) % m for j in range(k)) for i in range(m)]


def estimate_gauge_bounds(ensemble, grid=None, ps=(2.0, np.inf), a0_ps=(1.0, 2.0), qs=(2, 3), pair_qs=(2,)):
    """One report per gauge-field bound and exponent.

    Single-density bounds use ``rho = |psi|^2`` for each member; the weighted
    bilinear bound for ``A_0`` uses cyclic pairs and takes the minimum over
    both orderings.
    """
    grid = grid or RadialGrid(HARNESS_N, HARNESS_R)
    vals = ensemble.samples(grid)
    params = ensemble.parameters()
    m = vals.shape[0]
    rho = np.abs(vals) ** 2
    r = grid.nodes
    at = np.empty_like(rho)
    a0 = np.empty_like(rho)
    for i in range(m):
        at[i], _, a0[i] = _gauge_rows(grid, rho[i], rho[i])
    l1 = _lp_rows(grid, rho, 1)
    l2 = _lp_rows(grid, rho, 2)
    base = {"grid_n": grid.n, "r_max": grid.r_max, "seed": ensemble.seed, "count": len(ensemble)}
    reports = [
        _report("a_theta_sup_l1", _lp_rows(grid, at, np.inf), l1, params, base),
        _report("a_theta_over_r_sup_l2", _lp_rows(grid, at / r, np.inf), l2, params, base),
    ]
    for p in ps:
        reports.append(_report(f"a_theta_over_r2[p={_fmt(float(p))}]", _lp_rows(grid, at / r**2, p),
                               _lp_rows(grid, rho, p), params, {**base, "p": float(p)}))
    for p in a0_ps:
        if not 1 <= p < np.inf:
            raise ValueError(f"the A_0 L^p bound holds for 1 <= p < inf, got {p}")
        reports.append(_report(f"a_zero_lp[p={_fmt(float(p))}]", _lp_rows(grid, a0, p),
                               l1 * _lp_rows(grid, rho, p), params, {**base, "p": float(p)}))
    reports.append(_report("a_zero_sup_l2sq", _lp_rows(grid, a0, np.inf), l2**2, params, base))
    for p in ps:
        if not 1 < p <= np.inf:
            raise ValueError(f"the A_theta^2 / r^2 bound holds for 1 < p <= inf, got {p}")
        reports.append(_report(f"a_theta_sq_over_r2[p={_fmt(float(p))}]", _lp_rows(grid, at**2 / r**2, p),
                               l1 * _lp_rows(grid, rho, p), params, {**base, "p": float(p)}))
    reports.append(_report("a_theta_sq_over_r2_sup_l2sq", _lp_rows(grid, at**2 / r**2, np.inf), l2**2,
                           params, base))
    l2psi = _lp_rows(grid, vals, 2)
    for q in qs:
        if not 1 < q < np.inf:
            raise ValueError(f"q must satisfy 1 < q < inf, got {q}")
        hq = _hs_rows(grid, vals, 1.0 / q)
        reports.append(_report(f"a_theta_weighted_sq[q={_fmt(q)}]", _lp_rows(grid, at * r ** (-2.0 / q), np.inf),
                               hq**2, params, {**base, "q": q}))
        reports.append(_report(f"a_theta_weighted[q={_fmt(q)}]", _lp_rows(grid, at * r ** (-1.0 / q), np.inf),
                               hq * l2psi, params, {**base, "q": q}))
    groups = _pairs(m, 2)
    for q in pair_qs:
        if not 1 < q < np.inf:
            raise ValueError(f"q must satisfy 1 < q < inf, got {q}")
        p = q / (q - 1.0)
        hq = _hs_rows(grid, vals, 1.0 / q)
        hp = _hs_rows(grid, vals, 1.0 / p)
        lhs, rhs = [], []
        for i, j in groups:
            _, _, a0ij = _gauge_rows(grid, rho[i], rho[j])
            lhs.append(np.max(np.abs(r ** (1.0 / p) * a0ij)))
            rhs.append(min(hq[i] ** 2 * hp[j] * l2psi[j], hq[j] ** 2 * hp[i] * l2psi[i]))
        reports.append(_report(f"a_zero_weighted[q={_fmt(q)}]", lhs, rhs, params, {**base, "q": q, "p": p},
                               groups))
    return reports


# --------------------------------------------------------------------------
# nonlinear bounds


def min_over_permutations(weights):
    """``min_tau prod_k weights[k][tau(k)]`` and the minimising permutation.

    ``weights[k][i]`` is the norm used in slot k for function i.
    """
    m = len(weights[0])
    best, arg = np.inf, None
    for tau in permutations(range(m)):
        v = 1.0
        for slot, i in enumerate(tau):
            v *= weights[slot][i]
        if v < best:
            best, arg = v, tau
    return best, arg


def estimate_mainnest(ensemble, grid=None):
    """Reports for ``||a_{rho1,rho2} psi3||_2`` and for the split gauge-product bound.

    The first is compared with ``|psi1|_{1/2} |psi2|_{1/2} min_{S3} |psi_t1|_{1/2}
    |psi_t2|_{1/2} |psi_t3|_2``; the second (``||A_0 Theta|| + ||A_th A_th / r^2
    Theta||``) with ``|psi1|_{1/2} |psi2|_{1/2} |Theta|_{1/2} min_{S2} |psi_t1|_{1/2}
    |psi_t2|_2``. Returns ``(combined, product)``.
    """
    grid = grid or RadialGrid(HARNESS_N, HARNESS_R)
    vals = ensemble.samples(grid)
    params = ensemble.parameters()
    m = vals.shape[0]
    rho = np.abs(vals) ** 2
    r = grid.nodes
    h12 = _hs_rows(grid, vals, 0.5)
    l2 = _lp_rows(grid, vals, 2)
    groups = _pairs(m, 3)
    lhs_a, rhs_a, lhs_b, rhs_b, perms = [], [], [], [], []
    for i, j, k in groups:
        at1, at2, a0 = _gauge_rows(grid, rho[i], rho[j])
        a = a0 + at1 * at2 / r**2
        lhs_a.append(_lp_rows(grid, a * vals[k], 2))
        tri = (i, j, k)
        mn, tau = min_over_permutations([[h12[x] for x in tri], [h12[x] for x in tri], [l2[x] for x in tri]])
        perms.append(tau)
        rhs_a.append(h12[i] * h12[j] * mn)
        lhs_b.append(_lp_rows(grid, a0 * vals[k], 2) + _lp_rows(grid, at1 * at2 / r**2 * vals[k], 2))
        rhs_b.append(h12[i] * h12[j] * h12[k] * min(h12[i] * l2[j], h12[j] * l2[i]))
    base = {"grid_n": grid.n, "r_max": grid.r_max, "seed": ensemble.seed, "count": len(ensemble)}
    rep_a = _report("combined_potential", lhs_a, rhs_a, params, base, groups)
    rep_a.settings["minimising_permutations"] = [list(t) for t in perms]
    rep_b = _report("gauge_product", lhs_b, rhs_b, params, base, groups)
    return rep_a, rep_b


# --------------------------------------------------------------------------
# trilinear forms


def trilinear_T(f, g, h, t, t1=0.0, t2=0.0, t3=0.0, conj=(False, False, False), method="spectral", dt=1e-3):
    """``e^{i(t-t1)Lap} f * e^{i(t-t2)Lap} g * e^{i(t-t3)Lap} h``.

    ``method='spectral'`` uses the exact flow of the discrete Laplacian;
    ``'cn'`` composes Crank-Nicolson steps of size at most ``dt``. ``conj``
    replaces the corresponding evolved factor by its complex conjugate.
    """
    grid = _same_grid(f, g, h)
    out = np.ones(grid.n, dtype=np.complex128)
    for fld, tj, cj in zip((f, g, h), (t1, t2, t3), conj):
        tau = t - tj
        if method == "spectral":
            v = spectral_transform(grid).evolve(np.asarray(fld.values, dtype=np.complex128), tau)
        elif method == "cn":
            steps = max(1, int(math.ceil(abs(tau) / dt))) if tau != 0 else 0
            v = free_propagate(fld, tau / steps, steps).values if steps else np.asarray(fld.values, complex)
        else:
            raise ValueError(f"unknown method {method!r}")
        out *= np.conj(v) if cj else v
    return RadialField(grid, out, t)


def _time_grid(t0, samples):
    if samples < 2:
        raise ValueError("need at least 2 time samples")
    return np.linspace(0.0, t0, samples)


def _evolutions(grid, vals, times, offsets):
    # exact discrete flow of every member at times[j] - offsets[i]: (m, n, nt)
    st = spectral_transform(grid)
    c = st.coefficients(vals.T) * np.exp(1j * np.outer(st.eigenvalues, offsets))
    ph = np.exp(-1j * np.outer(st.eigenvalues, times))
    out = np.empty((vals.shape[0], grid.n, times.size), dtype=np.complex128)
    for i in range(vals.shape[0]):
        out[i] = st.from_coefficients(c[:, i, None] * ph)
    return out


def _trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def _trilinear_reports(ensemble, s, t0, grid, time_samples, which):
    grid = grid or RadialGrid(HARNESS_N, HARNESS_R)
    if not t0 > 0:
        raise ValueError(f"t0 must be positive, got {t0}")
    vals = ensemble.samples(grid)
    params = ensemble.parameters()
    m = vals.shape[0]
    times = _time_grid(t0, time_samples)
    offsets = np.array([p["offset"] for p in params]) * t0
    ev = _evolutions(grid, vals, times, offsets)
    hs = _hs_rows(grid, vals, s)
    l2 = _lp_rows(grid, vals, 2)
    groups = _pairs(m, 3)
    out = {}
    for kind in which:
        lhs, rhs = [], []
        for i, j, k in groups:
            prod = ev[i] * ev[j] * ev[k]
            if kind == "TH":
                series = sobolev_norms_batch(grid, prod, s)
                rhs.append(t0**s * hs[i] * hs[j] * hs[k])
            else:
                series = np.sqrt(TWO_PI * (np.abs(prod) ** 2).T @ grid.weights)
                rhs.append(t0 ** (s / 2) * l2[i] * l2[j] * hs[k])
            lhs.append(_trapezoid(series, times))
        name = f"trilinear_hs[s={_fmt(float(s))}]" if kind == "TH" else f"trilinear_l2[s={_fmt(float(s))}]"
        settings = {"s": float(s), "t0": float(t0), "time_samples": int(time_samples), "grid_n": grid.n,
                    "r_max": grid.r_max, "seed": ensemble.seed, "count": len(ensemble)}
        out[kind] = _report(name, lhs, rhs, params, settings, groups)
    return out


def estimate_TH(ensemble, s=2.0 / 3.0, t0=1.0, grid=None, time_samples=HARNESS_TIME_SAMPLES):
    """``int_0^t0 ||T||_{H^s-dot} dt`` against ``t0^s`` times three ``H^s-dot`` norms."""
    if not 0 < s <= 2.0 / 3.0:
        raise ValueError(f"the trilinear H^s bound needs 0 < s <= 2/3, got {s}")
    return _trilinear_reports(ensemble, s, t0, grid, time_samples, ("TH",))["TH"]


def estimate_TL2(ensemble, s=2.0 / 3.0, t0=1.0, grid=None, time_samples=HARNESS_TIME_SAMPLES):
    """``int_0^t0 ||T||_2 dt`` against ``t0^{s/2} ||f||_2 ||g||_2 ||h||_{H^s-dot}``."""
    if not 0 < s <= 2.0:
        raise ValueError(f"the trilinear L^2 bound needs 0 < s <= 2, got {s}")
    return _trilinear_reports(ensemble, s, t0, grid, time_samples, ("TL2",))["TL2"]


def estimate_trilinear(ensemble, s=2.0 / 3.0, t0=1.0, grid=None, time_samples=HARNESS_TIME_SAMPLES):
    """Both trilinear reports from one set of evolutions: ``(TH, TL2)``."""
    if not 0 < s <= 2.0 / 3.0:
        raise ValueError(f"the trilinear H^s bound needs 0 < s <= 2/3, got {s}")
    out = _trilinear_reports(ensemble, s, t0, grid, time_samples, ("TH", "TL2"))
    return out["TH"], out["TL2"]


# --------------------------------------------------------------------------
# suite with refinement


def _suite_at(ensemble, grid, time_samples, s, t0, qs=(2, 3)):
    reps = []
    for p in (2.0, 4.0):
        reps.append(hardy_ratio("inv_rdr", 0, p, ensemble, grid))
    for n in (0, 1):
        for p in (2.0, np.inf):
            reps.append(hardy_ratio("inv_rn_bar", n, p, ensemble, grid))
    reps.append(hardy_ratio("inv_dr", 0, None, ensemble, grid))
    reps.extend(estimate_gauge_bounds(ensemble, grid, qs=qs))
    reps.extend(estimate_mainnest(ensemble, grid))
    reps.extend(estimate_trilinear(ensemble, s, t0, grid, time_samples))
    return reps


def run_suite(ensemble, n=HARNESS_N, r_max=HARNESS_R, time_samples=HARNESS_TIME_SAMPLES, s=2.0 / 3.0, t0=1.0,
              refine=True, select=None, qs=(2, 3)):
    """Every probe at ``n`` and (optionally) at ``2n`` with doubled time samples.

    ``select`` filters reports by estimate id prefix. Each report carries the
    refined maximum and whether it moved by at most 10%.
    """
    base = _suite_at(ensemble, RadialGrid(n, r_max), time_samples, s, t0, qs)
    if select:
        base = [r for r in base if any(r.estimate.startswith(x) for x in select)]
    if not refine:
        return base
    fine = {r.estimate: r for r in _suite_at(ensemble, RadialGrid(2 * n, r_max), 2 * time_samples, s, t0, qs)}
    for rep in base:
        attach_refinement(rep, fine[rep.estimate])
    return base


def attach_refinement(coarse, fine, tol=REFINEMENT_TOL):
    coarse.refined_max_ratio = fine.max_ratio
    if coarse.max_ratio > 0 and math.isfinite(coarse.max_ratio) and math.isfinite(fine.max_ratio):
        change = abs(fine.max_ratio - coarse.max_ratio) / coarse.max_ratio
    else:
        change = 0.0 if coarse.max_ratio == fine.max_ratio else math.inf
    coarse.refinement_change = change
    coarse.refinement_stable = bool(change <= tol)
    return coarse
