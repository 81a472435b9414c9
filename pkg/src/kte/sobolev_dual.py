"""Dual Sobolev pseudo-norm of ``nu - mu`` with respect to a reference measure ``lam``.

On a grid the norm is

    sup { sum_i f_i (nu_i - mu_i) : sum_e lam_e L*(grad f)_e <= 1 },

with ``grad`` the piecewise-linear (P1) element gradient: one element per
edge in 1D and two triangles per cell in 2D. Each node's ``lam`` weight is
shared evenly among the elements that contain it. Centered differences are avoided because they
ignore odd-even oscillations and would make the sup infinite.

Two solvers are provided:

* ``exact1d``: in 1D every edge field is a gradient, so the problem is an
  Orlicz norm of ``h (F_mu - F_nu) / lam_e`` and is solved in closed form up to
  a scalar minimization.
* ``ascent``: any dimension. For a multiplier ``eta`` the concave problem
  ``max_f sum f d - eta sum lam L*(grad f)`` is solved by damped Newton, and
  ``eta`` is tuned until the constraint is active.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .convex_cost import PowerCost, golden_max
from .errors import InvalidSpec
from .grid import GridField, gaussian_smooth
from .orlicz import luxemburg_weighted, orlicz_weighted


@dataclass
class DualNormProblem:
    """Grid, three node-weight arrays and a cost with finite conjugate."""

    origin: tuple
    h: tuple
    n: tuple
    mu: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    spec: object

    def __post_init__(self):
        self.origin = tuple(np.atleast_1d(self.origin).astype(float))
        self.h = tuple(np.atleast_1d(self.h).astype(float))
        self.n = tuple(int(k) for k in np.atleast_1d(self.n))
        shape = self.n
        self.mu = np.asarray(self.mu, dtype=float).reshape(shape)
        self.nu = np.asarray(self.nu, dtype=float).reshape(shape)
        self.lam = np.asarray(self.lam, dtype=float).reshape(shape)
        if np.any(self.lam <= 0):
            raise InvalidSpec("reference weights must be strictly positive at every node")
        for name in ("mu", "nu"):
            w = getattr(self, name)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
                raise InvalidSpec(f"{name} must be a probability vector on the grid")
        if self.spec.dim != len(self.n):
            raise InvalidSpec("cost dimension does not match the grid")

    @classmethod
    def on_grid(cls, grid, mu, nu, lam, spec):
        return cls(grid.origin, grid.h, grid.n, mu, nu, lam, spec)

    @property
    def dim(self):
        return len(self.n)

    def grid(self, values=None):
        return GridField(self.origin, self.h, self.n, np.zeros(self.n) if values is None else values)


@dataclass
class DualNormResult:
    value: float
    witness_f: GridField
    constraint: float
    method: str
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# discrete gradient


def element_gradient(n, h):
    """Sparse P1 gradient operators and the vertex lists of each element.

    Returns ``(ops, vertices)`` where ``ops`` is a list of ``dim`` sparse
    matrices (elements x nodes) and ``vertices`` is an integer array
    (elements x (dim + 1)) of flat node indices.
    """
    n = tuple(n)
    if len(n) == 1:
        m = n[0]
        e = np.arange(m - 1)
        rows = np.r_[e, e]
        cols = np.r_[e, e + 1]
        vals = np.r_[-np.ones(m - 1), np.ones(m - 1)] / h[0]
        G = sp.csr_matrix((vals, (rows, cols)), shape=(m - 1, m))
        return [G], np.stack([e, e + 1], axis=1)
    n0, n1 = n
    i, j = np.meshgrid(np.arange(n0 - 1), np.arange(n1 - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = i * n1 + j
    b = (i + 1) * n1 + j
    c = i * n1 + j + 1
    d = (i + 1) * n1 + j + 1
    ncell = a.size
    t1 = np.arange(ncell)
    t2 = ncell + t1
    # lower triangle (a, b, c), upper triangle (d, c, b)
    gx = sp.csr_matrix((np.r_[-np.ones(ncell), np.ones(ncell), -np.ones(ncell), np.ones(ncell)] / h[0],
                        (np.r_[t1, t1, t2, t2], np.r_[a, b, c, d])), shape=(2 * ncell, n0 * n1))
    gy = sp.csr_matrix((np.r_[-np.ones(ncell), np.ones(ncell), -np.ones(ncell), np.ones(ncell)] / h[1],
                        (np.r_[t1, t1, t2, t2], np.r_[a, c, b, d])), shape=(2 * ncell, n0 * n1))
    verts = np.concatenate([np.stack([a, b, c], 1), np.stack([d, c, b], 1)])
    return [gx, gy], verts


def element_weights(lam, verts):
    """Split each node's ``lam`` weight evenly over the elements containing it.

    The element weights then sum to the total mass of ``lam``.
    """
    flat = lam.ravel()
    counts = np.bincount(verts.ravel(), minlength=flat.size)
    share = flat / np.maximum(counts, 1)
    return share[verts].sum(axis=1)


def apply_gradient(ops, f):
    return np.stack([G @ f for G in ops], axis=-1)


def conjugate_norm(spec, g, w):
    """Luxemburg norm of the element field ``g`` for the conjugate cost."""
    conj = spec.conjugate

    class _Conj:
        dim = spec.dim

        @staticmethod
        def L(x):
            return conj.value(x)

    return luxemburg_weighted(g, w, _Conj)


# ---------------------------------------------------------------------------
# solvers


def _exact_1d(prob):
    h = prob.h[0]
    ops, verts = element_gradient(prob.n, prob.h)
    w = element_weights(prob.lam, verts)
    gap = np.cumsum(prob.mu - prob.nu)[:-1]
    u = (h * gap / w)[:, None]
    value, k = orlicz_weighted(u, w, prob.spec, return_k=True)
    if value == 0.0:
        return 0.0, np.zeros(prob.n[0])
    g = prob.spec.grad(k * u)[:, 0]
    f = np.r_[0.0, np.cumsum(h * g)]
    return value, f


def _newton(ops, w, d, spec, eta, f0, max_iter=200):
    """Maximize ``<d, f> - eta sum w L*(grad f)`` with node 0 pinned to 0."""
    conj = spec.conjugate
    dim = len(ops)
    B = sp.vstack(ops).tocsr()
    ne = ops[0].shape[0]
    f = f0.copy()
    f[0] = 0.0

    def objective(ff):
        g = apply_gradient(ops, ff)
        return eta * float(np.dot(w, conj.value(g))) - float(np.dot(d, ff))

    # rescale the start along its ray; the objective is convex in the scale
    if np.any(f):
        log_scale, best = golden_max(lambda la: -objective(math.exp(la) * f), -12.0, 12.0, rtol=1e-3)
        scale = math.exp(float(log_scale))
        if -float(best) < objective(f):
            f = scale * f
    obj = objective(f)
    for it in range(max_iter):
        g = apply_gradient(ops, f)
        cg = conj.grad(g)
        grad = eta * (B.T @ (w[:, None] * cg).T.ravel()) - d
        # element Hessians of L* by centered differences of its gradient
        step = np.maximum(1e-5 * np.linalg.norm(g, axis=1), 1e-10)
        hess = np.empty((ne, dim, dim))
        for b in range(dim):
            e = np.zeros(dim)
            e[b] = 1.0
            hess[:, :, b] = (conj.grad(g + step[:, None] * e) - conj.grad(g - step[:, None] * e)) / (2 * step[:, None])
        hess = 0.5 * (hess + hess.transpose(0, 2, 1))
        # where L* bends less than its secant along the ray (growth below
        # quadratic), Newton overshoots through zero; raise the radial
        # curvature to the secant value so those elements take IRLS-type steps
        gn2 = np.einsum("ed,ed->e", g, g)
        safe = np.where(gn2 > 0, gn2, 1.0)
        secant = np.einsum("ed,ed->e", cg, g) / safe
        radial = np.einsum("ea,eab,eb->e", g, hess, g) / safe
        lift = np.where(gn2 > 0, np.maximum(secant - radial, 0.0), 0.0) / safe
        hess = hess + lift[:, None, None] * g[:, :, None] * g[:, None, :]
        floor = 1e-10 * max(float(np.max(np.abs(hess))), 1e-300)
        blocks = [[sp.diags(w * (hess[:, a, b] + (floor if a == b else 0.0))) for b in range(dim)] for a in range(dim)]
        H = (B.T @ sp.bmat(blocks, format="csr") @ B) * eta
        H = H.tocsc()[1:, 1:]
        delta = np.zeros_like(f)
        delta[1:] = spsolve(H, -grad[1:])
        decrement = -float(np.dot(grad, delta))
        if not np.isfinite(decrement) or decrement <= 0:
            delta = -grad
            delta[0] = 0.0
            decrement = float(np.dot(grad, grad))
        tstep = 1.0
        while True:
            trial = f + tstep * delta
            new = objective(trial)
            if new <= obj - 1e-4 * tstep * decrement or tstep < 1e-12:
                break
            tstep *= 0.5
        if tstep < 1e-12:
            break
        f, old = trial, obj
        obj = new
        if 0.5 * decrement < 1e-15 * (1.0 + abs(obj)) or abs(old - obj) <= 1e-16 * (1.0 + abs(obj)):
            break
    return f, it + 1


def _ascent(prob, restarts=2, seed=0):
    ops, verts = element_gradient(prob.n, prob.h)
    w = element_weights(prob.lam, verts)
    d = (prob.nu - prob.mu).ravel()
    conj = prob.spec.conjugate
    B = sp.vstack(ops).tocsr()
    # Poisson start: grad^T W grad f = d
    lap = (B.T @ sp.diags(np.tile(w, len(ops))) @ B).tocsc()[1:, 1:]
    base = np.r_[0.0, spsolve(lap, d[1:])]
    rng = np.random.default_rng(seed)
    best = (-math.inf, None, None)
    total_newton = 0
    for r in range(restarts):
        start = base if r == 0 else base * (1.0 + 0.3 * rng.standard_normal(base.size))
        state = {"f": start}

        def active(log_eta, iters):
            nonlocal total_newton
            f, its = _newton(ops, w, d, prob.spec, math.exp(log_eta), state["f"], max_iter=iters)
            total_newton += its
            state["f"] = f
            return math.log(max(float(np.dot(w, conj.value(apply_gradient(ops, f)))), 1e-300))

        # the constraint value decreases in eta; bracket loosely, then refine
        lo, hi = -1.0, 1.0
        while active(lo, 30) < 0:
            lo -= 2.0
        while active(hi, 30) > 0:
            hi += 2.0
        log_eta = brentq(lambda le: active(le, 60), lo, hi, xtol=1e-8)
        active(log_eta, 400)
        f = state["f"]
        norm = conjugate_norm(prob.spec, apply_gradient(ops, f), w)
        value = float(np.dot(d, f)) / norm
        if value > best[0]:
            best = (value, f / norm, r)
    return best[0], best[1], {"restarts": restarts, "best_restart": best[2], "newton_steps": total_newton}


def dual_sobolev_norm(prob, method="auto", restarts=2, seed=0):
    """Dual Sobolev pseudo-norm and a feasible witness attaining it.

    Parameters
    ----------
    prob : DualNormProblem
    method : {"auto", "exact1d", "ascent"}
        ``auto`` picks ``exact1d`` on 1D grids.
    restarts : int
        Starting points for ``ascent`` (the problem is concave, so these only
        guard against numerical stalls).
    """
    prob.spec.conjugate  # NotSuperlinear if L* is not finite
    d = prob.nu - prob.mu
    if not np.any(d):
        return DualNormResult(0.0, prob.grid(), 0.0, "degenerate")
    if method == "auto":
        method = "exact1d" if prob.dim == 1 else "ascent"
    info = {}
    if method == "exact1d":
        if prob.dim != 1:
            raise ValueError("exact1d needs a 1D grid")
        _, f = _exact_1d(prob)
    elif method == "ascent":
        _, f, info = _ascent(prob, restarts=restarts, seed=seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    ops, verts = element_gradient(prob.n, prob.h)
    w = element_weights(prob.lam, verts)
    norm = conjugate_norm(prob.spec, apply_gradient(ops, f.ravel()), w)
    f = f.ravel() / norm
    value = float(np.dot(d.ravel(), f))
    g = apply_gradient(ops, f)
    constraint = float(np.dot(w, prob.spec.conjugate.value(g)))
    return DualNormResult(value, prob.grid(f.reshape(prob.n)), constraint, method, info)


def dual_sobolev_norm_1d_p(mu, nu, lam, p, h):
    """Closed form of the 1D dual norm for ``|x|^p`` measured with the ``L^q`` norm.

    ``(sum_e h |F_mu - F_nu|_e^p w_e^(1 - p))^(1/p)`` where ``F`` are
    cumulative sums at edge midpoints and ``w_e`` the edge density of
    ``lam`` (edge weight divided by ``h``; end nodes give all their weight
    to their single edge).
    """
    mu, nu, lam = (np.asarray(a, dtype=float).ravel() for a in (mu, nu, lam))
    gap = np.cumsum(mu - nu)[:-1]
    share = lam / np.r_[1.0, np.full(lam.size - 2, 2.0), 1.0]
    dens = (share[:-1] + share[1:]) / h
    return float(np.sum(h * np.abs(gap) ** p * dens ** (1.0 - p)) ** (1.0 / p))


def orlicz_factor(p):
    """``p^(1/p) q^(1/q)``: ratio of the Orlicz and Lebesgue norms for ``|x|^p``."""
    q = p / (p - 1.0)
    return p ** (1.0 / p) * q ** (1.0 / q)


# ---------------------------------------------------------------------------
# limit checks


def lsc_check(sequence, target, spec, grid, tol=1e-6, **kwargs):
    """Lower semicontinuity along a sequence of weight triples.

    ``sequence`` is a list of ``(mu_k, nu_k, lam_k)``; ``target`` the limit
    triple. The liminf is proxied by the minimum of the last three values.
    """
    vals = [dual_sobolev_norm(DualNormProblem.on_grid(grid, m, n, l, spec), **kwargs).value for m, n, l in sequence]
    limit = dual_sobolev_norm(DualNormProblem.on_grid(grid, *target, spec), **kwargs).value
    proxy = min(vals[-3:])
    return {"values": vals, "limit": limit, "liminf_proxy": proxy, "pass": bool(limit <= proxy + tol)}


def convolution_continuity_check(mu, nu, lam, spec, grid, eps_list, kappa=None, band=0.05, tol=1e-6, **kwargs):
    """Behaviour of the dual norm when all three measures are mollified.

    ``kappa(weights, eps)`` smooths node weights (default: Gaussian). For
    power costs the value at the smallest ``eps`` must be within ``band``
    of the unsmoothed value; otherwise the last three values must lie in
    ``[c - tol, c / gamma + tol]``.
    """
    if kappa is None:
        kappa = lambda w, eps: gaussian_smooth(w, grid.h, eps)
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be decreasing")
    c = dual_sobolev_norm(DualNormProblem.on_grid(grid, mu, nu, lam, spec), **kwargs).value
    vals = []
    for eps in eps_list:
        m, n, l = (kappa(np.asarray(a, float), eps) for a in (mu, nu, lam))
        vals.append(dual_sobolev_norm(DualNormProblem.on_grid(grid, m, n, l, spec), **kwargs).value)
    out = {"c": c, "values": vals}
    if isinstance(spec, PowerCost):
        lo, hi = c * (1 - band), c * (1 + band)
        out["limit_bounds"] = (lo, hi)
        out["pass"] = bool(lo <= vals[-1] <= hi)
    else:
        gam = spec.profile.gamma
        lo, hi = c - tol, c / gam + tol
        out["limit_bounds"] = (lo, hi)
        out["pass"] = bool(max(vals[-3:]) <= hi and min(vals[-3:]) >= lo)
    return out
