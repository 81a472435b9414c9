"""Luxemburg and Orlicz pseudo-norms on finite probability spaces.

For a cost ``L`` and a measure ``lam`` with weights ``w_i``:

* Luxemburg: the ``r`` with ``sum_i w_i L(u_i / r) = 1``,
* Orlicz: ``sup sum_i w_i <u_i, v_i>`` over ``v`` with ``sum_i w_i L*(v_i) <= 1``,
  computed as ``inf_k (1 + sum_i w_i L(k u_i)) / k`` (exact by Lagrangian
  duality since ``L** = L``).

Neither is assumed even: ``||-u||`` and ``||u||`` may differ.
"""

import math

import numpy as np
from scipy.optimize import brentq, minimize

from .convex_cost import PowerCost, golden_max
from .errors import OutOfDomain
from .measures import DiscreteMeasure, VectorSample


def _arrays(u, lam, dim):
    vals = u.values if isinstance(u, VectorSample) else np.asarray(u, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None] if dim == 1 else vals[None, :]
    w = lam.weights if isinstance(lam, DiscreteMeasure) else np.asarray(lam, dtype=float)
    if vals.shape[0] != w.size:
        raise ValueError(f"sample has {vals.shape[0]} values but measure has {w.size} atoms")
    return vals, w


def _integral(spec, vals, w, scale):
    try:
        return float(np.dot(w, spec.L(vals * scale)))
    except OutOfDomain:
        return math.inf


def luxemburg_weighted(vals, w, spec):
    """Luxemburg norm of the rows of ``vals`` under weights ``w``."""
    keep = np.any(vals != 0.0, axis=1)
    if not np.any(keep):
        return 0.0
    vals, w = vals[keep], w[keep]
    fun = lambda r: _integral(spec, vals, w, 1.0 / r) - 1.0
    hi = max(float(np.max(np.abs(vals))), 1e-300)
    while fun(hi) > 0.0:
        hi *= 2.0
    lo = hi
    while fun(lo) <= 0.0:
        lo *= 0.5
    r = brentq(fun, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    return float(r)


def luxemburg_norm(u, spec, lam):
    """Luxemburg pseudo-norm ``||u||_{L(lam)}``."""
    vals, w = _arrays(u, lam, spec.dim)
    return luxemburg_weighted(vals, w, spec)


def orlicz_weighted(vals, w, spec, return_k=False):
    """Orlicz pseudo-norm via the one-dimensional reduction over ``k``."""
    keep = np.any(vals != 0.0, axis=1)
    if not np.any(keep):
        return (0.0, math.inf) if return_k else 0.0
    spec.conjugate  # raises NotSuperlinear when L* is not finite
    vals, w = vals[keep], w[keep]
    lux = luxemburg_weighted(vals, w, spec)

    def objective(logk):
        logk = np.atleast_1d(logk)
        out = np.empty(logk.shape)
        for idx, lk in np.ndenumerate(logk):
            k = math.exp(lk)
            out[idx] = (1.0 + _integral(spec, vals, w, k)) / k
        return out

    # the minimizer satisfies k >= 1/(2 lux); the objective is quasi-convex in k
    base = -math.log(lux)
    grid = base + np.linspace(-math.log(2.0) - 1.0, 12.0, 401)
    g = objective(grid)
    j = int(np.argmin(g))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    lk, neg = golden_max(lambda x: -float(objective(x)[0]), lo, hi, rtol=1e-15)
    best = min(-neg, float(g[j]))
    if return_k:
        return best, math.exp(float(lk))
    return best


def orlicz_norm(u, spec, lam):
    """Orlicz pseudo-norm ``|u|_{L(lam)}``."""
    vals, w = _arrays(u, lam, spec.dim)
    return orlicz_weighted(vals, w, spec)


def orlicz_norm_direct(u, spec, lam, restarts=8, seed=0):
    """Direct maximization of ``sum w <u, v>`` subject to ``sum w L*(v) <= 1``.

    SLSQP with analytic gradients from several random starts. Intended as an
    independent check of :func:`orlicz_norm` on small supports.
    """
    vals, w = _arrays(u, lam, spec.dim)
    if not np.any(vals):
        return 0.0
    conj = spec.conjugate
    shape = vals.shape
    rng = np.random.default_rng(seed)

    def obj(x):
        return -float(np.sum(w[:, None] * vals * x.reshape(shape)))

    def obj_grad(x):
        return -(w[:, None] * vals).ravel()

    def con(x):
        return 1.0 - float(np.dot(w, conj.value(x.reshape(shape))))

    def con_grad(x):
        return -(w[:, None] * conj.grad(x.reshape(shape))).ravel()

    # keep iterates inside a finite conjugate domain (table costs)
    bounds = None
    if np.isfinite(conj.domain_radius):
        b = conj.domain_radius / math.sqrt(spec.dim) * (1.0 - 1e-9)
        bounds = [(-b, b)] * vals.size
    best = 0.0
    for r in range(restarts):
        x0 = vals.ravel() * (1.0 if r == 0 else rng.uniform(0.1, 2.0)) + (0 if r == 0 else 0.1 * rng.normal(size=vals.size))
        # rescale the start into the feasible set
        while con(x0) < 0:
            x0 = 0.5 * x0
        if bounds is not None:
            x0 = np.clip(x0, bounds[0][0], bounds[0][1])
        res = minimize(obj, x0, jac=obj_grad, method="SLSQP", bounds=bounds,
                       constraints=[{"type": "ineq", "fun": con, "jac": con_grad}],
                       options={"ftol": 1e-15, "maxiter": 1000})
        x = res.x
        if con(x) < -1e-12:
            # pull back onto the feasible set before scoring
            lo, hi = 0.0, 1.0
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if con(mid * x) >= 0 else (lo, mid)
            x = lo * x
        best = max(best, -obj(x))
    return best


def mixture_bound_check(u, spec, lams, ts, slack=1e-9):
    """Quasi-concavity and concavity-type bounds of ``lam -> ||u||_{L(lam)}``.

    Parameters
    ----------
    lams : list of DiscreteMeasure or weight arrays on a common support
    ts : convex weights, one per measure
    """
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0) or abs(ts.sum() - 1.0) > 1e-12 or len(ts) != len(lams):
        raise ValueError("ts must be convex weights, one per measure")
    weights = [lam.weights if isinstance(lam, DiscreteMeasure) else np.asarray(lam, float) for lam in lams]
    vals, _ = _arrays(u, weights[0], spec.dim)
    mix = sum(t * w for t, w in zip(ts, weights))
    lhs = luxemburg_weighted(vals, mix, spec)
    parts = np.array([luxemburg_weighted(vals, w, spec) for w in weights])
    out = {"lhs": lhs, "parts": parts.tolist(), "min_rhs": float(parts.min())}
    out["pass_quasiconcave"] = lhs >= out["min_rhs"] - slack
    avg = float(np.dot(ts, parts))
    if isinstance(spec, PowerCost):
        out["rhs"] = avg
        out["factor"] = 1.0
    else:
        out["factor"] = spec.profile.gamma
        out["rhs"] = out["factor"] * avg
    out["pass_concave"] = lhs >= out["rhs"] - slack
    out["pass"] = bool(out["pass_quasiconcave"] and out["pass_concave"])
    return out


def _evaluate(u, pts):
    if callable(u):
        return np.asarray(u(pts), dtype=float)
    return u.interpolate(pts)


def convolution_bound_check(u, spec, lam, kap, slack=1e-9):
    """Compare ``||u||_{L(lam * kap)}`` with the kap-average of shifted norms.

    ``u`` is a callable on points of shape ``(k, dim)`` or a GridField
    (evaluated by interpolation). The shifted norm uses ``x -> u(x + y)``,
    so the average is over the mixture of translates ``lam`` moved by ``y``.
    """
    prod_pts = (lam.points[:, None, :] + kap.points[None, :, :]).reshape(-1, lam.dim)
    prod_w = (lam.weights[:, None] * kap.weights[None, :]).ravel()
    uvals = _evaluate(u, prod_pts).reshape(prod_w.size, -1)
    lhs = luxemburg_weighted(uvals, prod_w, spec)
    shifted = []
    per = uvals.reshape(lam.weights.size, kap.weights.size, -1)
    for j in range(kap.weights.size):
        shifted.append(luxemburg_weighted(per[:, j, :], lam.weights, spec))
    avg = float(np.dot(kap.weights, shifted))
    factor = 1.0 if isinstance(spec, PowerCost) else spec.profile.gamma
    rhs = factor * avg
    return {"lhs": lhs, "rhs": rhs, "factor": factor, "pass": bool(lhs >= rhs - slack)}
