"""Convex costs ``L`` on R^n, their Legendre transforms and Young functions.

Three kinds are supported:

* ``PowerCost``: ``L(x) = ||x||^p`` for the Euclidean or a weighted l^s norm,
* ``RadialCost``: ``L(x) = V(|x|)`` with ``V`` from the small grammar in
  :mod:`kte.expr`,
* ``BlackBoxCost``: a tabulated convex function on a 1D or 2D grid,
  evaluated by multilinear interpolation.

All evaluators take point arrays of shape ``(..., dim)`` and return arrays of
shape ``(...)``.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
from scipy.interpolate import PchipInterpolator, RegularGridInterpolator
from scipy.optimize import brentq

from . import expr as _expr
from .errors import Delta2Violation, InvalidOrder, InvalidSpec, NotSuperlinear, OutOfDomain, Unbounded

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def as_points(x, dim):
    """Coerce ``x`` to an array of points with trailing axis ``dim``.

    For ``dim == 1`` scalars and plain vectors of scalars are accepted.
    """
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise ValueError(f"expected points with trailing dimension {dim}, got shape {x.shape}")
    return x


def golden_max(fun, a, b, rtol=1e-12, max_iter=200):
    """Vectorized golden-section maximization of a unimodal ``fun`` on ``[a, b]``.

    ``a`` and ``b`` may be arrays; ``fun`` must act elementwise.
    Returns ``(argmax, max)``.
    """
    a = np.array(a, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if np.all(b - a <= rtol * np.maximum(np.abs(a) + np.abs(b), 1e-300)):
            break
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc, fd = fun(c), fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def gamma(p_plus, p_minus, rtol=1e-14):
    """Largest ``a + b`` over lines ``a + b r`` below ``min(r^p_plus, r^p_minus)``.

    The inner infimum over ``r`` is evaluated in closed form on each power
    branch, and the concave outer objective is maximized over ``b`` by golden
    section.
    """
    p1, p0 = float(p_plus), float(p_minus)
    if p0 < 1.0:
        raise InvalidOrder(f"p_minus must be >= 1, got {p0}")
    if p1 < p0:
        raise InvalidOrder(f"p_plus ({p1}) must be >= p_minus ({p0})")
    if p1 == p0:
        return 1.0

    def intercept(b):
        b = np.asarray(b, dtype=float)
        # branch r in [0, 1] of r^p1 - b r
        r1 = np.clip((b / p1) ** (1.0 / (p1 - 1.0)), 0.0, 1.0)
        low = r1 ** p1 - b * r1
        # branch r >= 1 of r^p0 - b r
        if p0 == 1.0:
            high = np.where(b > 1.0, -np.inf, 1.0 - b)
        else:
            # log domain: for p0 near 1 the stationary point is astronomically far out
            with np.errstate(divide="ignore"):
                log_r0 = np.clip(np.log(np.maximum(b, 1e-300) / p0) / (p0 - 1.0), 0.0, 700.0)
            r0 = np.exp(log_r0)
            high = r0 * (np.exp((p0 - 1.0) * log_r0) - b)
        return np.minimum(np.minimum(low, high), 0.0)

    # with a linear upper branch any slope above 1 makes the intercept -inf
    upper = 1.0 if p0 == 1.0 else p1
    _, best = golden_max(lambda b: intercept(b) + b, 0.0, upper, rtol=rtol)
    return float(best)


# ---------------------------------------------------------------------------
# cost kinds


class CostSpec:
    """Abstract convex cost. Use :func:`cost_from_dict` or the subclasses."""

    kind = "abstract"
    dim = 1

    def __call__(self, x):
        return self.L(as_points(x, self.dim))

    def L(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    @property
    def is_superlinear(self):
        raise NotImplementedError

    @property
    def is_even(self):
        return True

    def reflected(self):
        """The cost ``x -> L(-x)``."""
        if self.is_even:
            return self
        raise NotImplementedError

    def radius(self, r):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    @cached_property
    def conjugate(self):
        return self._make_conjugate()

    @cached_property
    def profile(self):
        return self._make_profile()

    def _make_conjugate(self):
        raise NotImplementedError

    def _make_profile(self):
        raise NotImplementedError

    def _validate(self, samples=256, seed=12345):
        rng = np.random.default_rng(seed)
        scale = self._sample_scale()
        zero = self.L(np.zeros((1, self.dim)))
        if abs(float(zero[0])) > 1e-12:
            raise InvalidSpec(f"L(0) must be 0, got {float(zero[0])}")
        x = scale * rng.uniform(-1.0, 1.0, size=(samples, self.dim))
        x = x[np.linalg.norm(x, axis=1) > 1e-3 * scale]
        lx = self.L(x)
        if np.any(~np.isfinite(lx)) or np.any(lx <= 0.0):
            raise InvalidSpec("L must be finite and positive away from 0")
        y = scale * rng.uniform(-1.0, 1.0, size=x.shape)
        ly = self.L(y)
        for t in (0.25, 0.5, 0.75):
            mid = self.L(t * x + (1.0 - t) * y)
            slack = 1e-9 * (1.0 + np.abs(lx) + np.abs(ly))
            if np.any(mid > t * lx + (1.0 - t) * ly + slack):
                raise InvalidSpec("L fails the sampled convexity check")

    def _sample_scale(self):
        return 4.0


def _euclid(x):
    """Euclidean norm over the last axis without underflow for tiny entries."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 1:
        return np.abs(x[..., 0])
    big = np.max(np.abs(x), axis=-1, keepdims=True)
    safe = np.where(big > 0, big, 1.0)
    return big[..., 0] * np.sqrt(np.sum((x / safe) ** 2, axis=-1))


def _lp_norm(x, s, w):
    ax = np.abs(x)
    if np.isinf(s):
        return np.max(ax * w, axis=-1)
    return np.sum(w * ax ** s, axis=-1) ** (1.0 / s)


@dataclass(frozen=True)
class _Norm:
    """Euclidean norm, or ``(sum_i w_i |x_i|^s)^(1/s)`` for ``s >= 1``."""

    kind: str = "euclidean"
    s: float = 2.0
    weights: tuple = ()

    def value(self, x):
        if self.kind == "euclidean":
            return _euclid(x)
        return _lp_norm(x, self.s, np.asarray(self.weights))

    def grad(self, x):
        n = self.value(x)[..., None]
        safe = np.where(n > 0, n, 1.0)
        if self.kind == "euclidean":
            return np.where(n > 0, x / safe, 0.0)
        w = np.asarray(self.weights)
        s = self.s
        g = w * np.abs(x) ** (s - 1.0) * np.sign(x) / safe ** (s - 1.0)
        return np.where(n > 0, g, 0.0)

    def dual_value(self, y):
        if self.kind == "euclidean":
            return _euclid(y)
        w = np.asarray(self.weights)
        z = y * w ** (-1.0 / self.s)
        if self.s == 1.0:
            return np.max(np.abs(z), axis=-1)
        return _lp_norm(z, self.s / (self.s - 1.0), np.ones_like(w))

    def dual_grad(self, y):
        if self.kind == "euclidean":
            return _Norm().grad(y)
        w = np.asarray(self.weights)
        scale = w ** (-1.0 / self.s)
        z = y * scale
        if self.s == 1.0:
            idx = np.argmax(np.abs(z), axis=-1)
            g = np.zeros_like(z)
            np.put_along_axis(g, idx[..., None], np.take_along_axis(np.sign(z), idx[..., None], -1), -1)
            return g * scale
        sd = self.s / (self.s - 1.0)
        return _Norm("lp", sd, tuple(np.ones_like(w))).grad(z) * scale

    def max_euclidean_on_unit_ball(self):
        if self.kind == "euclidean":
            return 1.0
        w = np.asarray(self.weights)
        s = self.s
        a = w ** (-2.0 / s)
        if s <= 2.0:
            return float(np.sqrt(a.max()))
        r = s / (s - 2.0)
        return float(np.sqrt(np.sum(a ** r) ** (1.0 / r)))


class PowerCost(CostSpec):
    """``L(x) = ||x||^p`` with ``p >= 1``."""

    kind = "power"

    def __init__(self, p, dim=1, norm="euclidean", norm_p=2.0, weights=None):
        if not p >= 1:
            raise InvalidSpec(f"power exponent must be >= 1, got {p}")
        self.p = float(p)
        self.dim = int(dim)
        if self.dim < 1:
            raise InvalidSpec("dim must be >= 1")
        if norm == "euclidean":
            self.norm = _Norm()
        elif norm == "lp":
            if not norm_p >= 1:
                raise InvalidSpec("norm_p must be >= 1")
            w = np.ones(self.dim) if weights is None else np.asarray(weights, dtype=float)
            if w.shape != (self.dim,) or np.any(w <= 0):
                raise InvalidSpec("norm weights must be positive, one per axis")
            self.norm = _Norm("lp", float(norm_p), tuple(w))
        else:
            raise InvalidSpec(f"unknown norm {norm!r}")
        self._validate()

    def L(self, x):
        return self.norm.value(x) ** self.p

    def grad(self, x):
        n = self.norm.value(x)[..., None]
        return self.p * n ** (self.p - 1.0) * self.norm.grad(x)

    @property
    def is_superlinear(self):
        return self.p > 1.0

    def radius(self, r):
        return np.asarray(r, dtype=float) ** (1.0 / self.p) * self.norm.max_euclidean_on_unit_ball()

    def to_dict(self):
        d = {"kind": "power", "p": self.p, "norm": self.norm.kind, "dim": self.dim}
        if self.norm.kind == "lp":
            d["norm_p"] = self.norm.s
            d["weights"] = list(self.norm.weights)
        return d

    def _make_conjugate(self):
        if self.p == 1.0:
            raise NotSuperlinear("the conjugate of a norm is an indicator; p must exceed 1")
        p = self.p
        q = p / (p - 1.0)
        const = 1.0 / (q * p ** (q - 1.0))
        norm = self.norm

        def value(y):
            return const * norm.dual_value(y) ** q

        def grad(y):
            n = norm.dual_value(y)[..., None]
            return const * q * n ** (q - 1.0) * norm.dual_grad(y)

        return ConjugateSpec(self, value, grad, "analytic", np.inf)

    def _make_profile(self):
        p = self.p
        return YoungProfile(
            phi=lambda r: np.asarray(r, dtype=float) ** p,
            p_plus=p, p_minus=p,
            phi_inv=lambda s: np.asarray(s, dtype=float) ** (1.0 / p),
            exact=True,
        )


class RadialCost(CostSpec):
    """``L(x) = V(|x|)`` with ``V`` given as an expression in ``s``."""

    kind = "radial"

    def __init__(self, V, dim=1):
        self.text = V if isinstance(V, str) else str(V)
        self.V = _expr.parse(V) if isinstance(V, str) else V
        self.dim = int(dim)
        if self.dim < 1:
            raise InvalidSpec("dim must be >= 1")
        self._validate()

    def L(self, x):
        return self.V.value(_euclid(x))

    def grad(self, x):
        s = _euclid(x)
        d = self.V.deriv(s)[..., None]
        safe = np.where(s > 0, s, 1.0)[..., None]
        return np.where(s[..., None] > 0, d * x / safe, 0.0)

    @property
    def is_superlinear(self):
        return self.V.exponent_at_infinity > 1.0

    def radius(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        for idx, val in np.ndenumerate(r):
            if val <= 0:
                continue
            hi = 1.0
            while self.V.value(hi) < val:
                hi *= 2.0
            out[idx] = brentq(lambda s: self.V.value(s) - val, 0.0, hi, xtol=1e-15, rtol=1e-15)
        return out if out.ndim else float(out)

    def to_dict(self):
        return {"kind": "radial", "V": self.text, "dim": self.dim}

    def argmax_s(self, t, iters=200):
        """Solve ``V'(s) = t`` (smallest ``s`` with right derivative >= t).

        Safeguarded Newton inside a bisection bracket.
        """
        t = np.asarray(t, dtype=float)
        lo = np.zeros_like(t)
        hi = np.ones_like(t)
        for _ in range(2100):
            short = self.V.deriv(hi) < t
            if not np.any(short):
                break
            lo = np.where(short, hi, lo)
            hi = np.where(short, 2.0 * hi, hi)
        else:  # pragma: no cover - guarded by is_superlinear
            raise NotSuperlinear("V' is bounded; conjugate not finite")
        s = hi.copy()
        for _ in range(iters):
            slope = self.V.deriv(s)
            below = slope < t
            lo = np.where(below, s, lo)
            hi = np.where(below, hi, s)
            done = (hi - lo <= 1e-15 * hi) | (np.abs(slope - t) <= 1e-15 * t) | (t == 0)
            if np.all(done):
                break
            curv = self.V.deriv2(s)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = s - (slope - t) / curv
            ok = np.isfinite(step) & (step >= lo) & (step <= hi)
            s = np.where(done, s, np.where(ok, step, 0.5 * (lo + hi)))
        return np.where(t == 0, 0.0, np.maximum(s, 0.0))

    def _make_conjugate(self):
        if not self.is_superlinear:
            raise NotSuperlinear(f"V = {self.text} grows linearly; conjugate is not finite")

        def value(y):
            t = _euclid(y)
            s = self.argmax_s(t)
            return np.maximum(t * s - self.V.value(s), 0.0)

        def grad(y):
            t = _euclid(y)
            s = self.argmax_s(t)[..., None]
            safe = np.where(t > 0, t, 1.0)[..., None]
            return np.where(t[..., None] > 0, s * y / safe, 0.0)

        return ConjugateSpec(self, value, grad, "analytic", np.inf)

    def _make_profile(self):
        a0, a1 = self.V.exponent_at_zero, self.V.exponent_at_infinity
        if not self.V.has_max:
            # V(rs)/V(s) is a weighted mean of r^a whose weights shift toward
            # larger a as s grows, so the sup is one of the two limits.
            return YoungProfile(
                phi=lambda r: np.maximum(np.asarray(r, float) ** a0, np.asarray(r, float) ** a1),
                p_plus=a1, p_minus=a0,
                phi_inv=lambda s: np.minimum(np.asarray(s, float) ** (1.0 / a0),
                                             np.asarray(s, float) ** (1.0 / a1)),
                exact=True,
            )
        phi = lambda r: radial_phi_scan(self.V, r)
        pm, pp, err = richardson_derivatives(phi)
        return YoungProfile(phi=phi, p_plus=pp, p_minus=pm, exact=False, p_error=err)


def radial_phi_scan(V, r, n_scan=2401):
    """``sup_s V(r s)/V(s)`` by a log-spaced scan refined with golden section.

    The s -> 0 and s -> inf limits ``r^a0`` and ``r^a_inf`` are included
    exactly.
    """
    r = np.asarray(r, dtype=float)
    flat = np.atleast_1d(r).ravel()
    logs = np.linspace(-6.0, 6.0, n_scan)
    s = 10.0 ** logs
    vs = V.value(s)
    ratio = V.value(flat[:, None] * s[None, :]) / vs[None, :]
    k = np.argmax(ratio, axis=1)
    lo = logs[np.maximum(k - 1, 0)]
    hi = logs[np.minimum(k + 1, n_scan - 1)]
    fun = lambda ls: V.value(flat * 10.0 ** ls) / V.value(10.0 ** ls)
    _, refined = golden_max(fun, lo, hi, rtol=1e-13)
    best = np.maximum(ratio.max(axis=1), refined)
    best = np.maximum(best, flat ** V.exponent_at_zero)
    best = np.maximum(best, flat ** V.exponent_at_infinity)
    best = np.where(flat == 0.0, 0.0, best)
    return best.reshape(r.shape) if r.ndim else float(best[0])


class BlackBoxCost(CostSpec):
    """Tabulated cost on a rectilinear grid (dim 1 or 2) with multilinear interpolation."""

    kind = "blackbox"

    def __init__(self, axes, values, convex=True):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.dim = len(self.axes)
        if self.dim not in (1, 2):
            raise InvalidSpec("black-box tables must be 1D or 2D")
        self.values = np.asarray(values, dtype=float).reshape([len(a) for a in self.axes])
        self.convex = bool(convex)
        for a in self.axes:
            if a.size < 3 or np.any(np.diff(a) <= 0):
                raise InvalidSpec("table axes must be strictly increasing with >= 3 nodes")
            if not (a[0] < 0.0 < a[-1]):
                raise InvalidSpec("table must contain the origin in its interior")
        self._interp = RegularGridInterpolator(self.axes, self.values, bounds_error=False, fill_value=np.nan)
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        self.node_values = self.values.ravel()
        boundary = np.zeros(self.values.shape, dtype=bool)
        for ax in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[ax] = 0
            boundary[tuple(sl)] = True
            sl[ax] = -1
            boundary[tuple(sl)] = True
        self.boundary = boundary.ravel()
        self._validate()

    @classmethod
    def from_function(cls, fun, axes, convex=True):
        """Tabulate a vectorized ``fun(points) -> values`` on ``axes``."""
        axes = [np.asarray(a, dtype=float) for a in axes]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return cls(axes, np.asarray(fun(pts)).reshape(mesh[0].shape), convex=convex)

    def _sample_scale(self):
        return 0.99 * min(min(-a[0], a[-1]) for a in self.axes)

    def _validate(self, samples=256, seed=12345):
        if not self.convex:
            return
        super()._validate(samples, seed)

    def L(self, x):
        x = np.asarray(x, dtype=float)
        out = self._interp(x.reshape(-1, self.dim)).reshape(x.shape[:-1])
        if np.any(np.isnan(out)):
            raise OutOfDomain("point outside the black-box table")
        return out

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        step = 1e-3 * min(float(np.min(np.diff(a))) for a in self.axes)
        g = np.empty(x.shape)
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = step
            g[..., k] = (self.L(x + e) - self.L(x - e)) / (2.0 * step)
        return g

    @property
    def is_superlinear(self):
        # slope along each ray must keep increasing up to the table edge
        edge = self.nodes[self.boundary]
        inner = 0.5 * edge
        n_edge = np.linalg.norm(edge, axis=1)
        return bool(np.all(self.L(edge) / n_edge > self.L(inner) / (0.5 * n_edge)))

    @property
    def is_even(self):
        neg = -self.nodes
        inside = np.all([(neg[:, k] >= a[0]) & (neg[:, k] <= a[-1]) for k, a in enumerate(self.axes)], axis=0)
        return bool(np.allclose(self.L(neg[inside]), self.node_values[inside], rtol=1e-12, atol=1e-14))

    def reflected(self):
        axes = [-a[::-1] for a in self.axes]
        values = self.values[tuple(slice(None, None, -1) for _ in range(self.dim))]
        return BlackBoxCost(axes, values, convex=self.convex)

    def radius(self, r):
        r = float(r)
        if r <= 0:
            return 0.0
        inside = self.node_values <= r
        if np.any(inside & self.boundary):
            raise Unbounded(f"sublevel set {{L <= {r}}} reaches the table boundary")
        norms = np.linalg.norm(self.nodes, axis=1)
        k = int(np.argmax(np.where(inside, norms, -1.0)))
        if norms[k] == 0.0:
            return 0.0
        direction = self.nodes[k] / norms[k]
        lo = norms[k]
        hi = lo + max(float(np.max(np.diff(a))) for a in self.axes) * math.sqrt(self.dim)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            try:
                val = float(self.L(mid * direction[None, :])[0])
            except OutOfDomain:
                val = np.inf
            lo, hi = (mid, hi) if val <= r else (lo, mid)
            if hi - lo < 1e-14 * hi:
                break
        return lo

    def to_dict(self):
        return {"kind": "blackbox", "dim": self.dim, "axes": [a.tolist() for a in self.axes],
                "values": self.values.ravel().tolist(), "convex": self.convex}

    def _make_conjugate(self):
        nodes, vals = self.nodes, self.node_values
        edge = self.boundary
        n_edge = np.linalg.norm(nodes[edge], axis=1)
        domain = float(np.min(vals[edge] / n_edge))

        def _argmax(y):
            y = np.asarray(y, dtype=float)
            flat = y.reshape(-1, self.dim)
            scores = flat @ nodes.T - vals[None, :]
            k = np.argmax(scores, axis=1)
            if np.any(edge[k]):
                raise OutOfDomain("discrete Legendre sup attained on the table boundary")
            return k, scores[np.arange(len(k)), k], y.shape[:-1]

        def value(y):
            _, best, shape = _argmax(y)
            return best.reshape(shape)

        def grad(y):
            k, _, shape = _argmax(y)
            return nodes[k].reshape(shape + (self.dim,))

        return ConjugateSpec(self, value, grad, "grid-table", domain)

    def _make_profile(self):
        # near the origin the interpolant is piecewise linear on a few cells,
        # which would make every ray look linear; keep rays well resolved
        cell = max(float(np.max(np.diff(a))) for a in self.axes)
        norms = np.linalg.norm(self.nodes, axis=1)
        keep = (self.node_values > 0) & (norms >= 20.0 * cell)
        if not np.any(keep):
            keep = self.node_values > 0
        nodes = self.nodes[keep]
        lx = self.L(nodes)

        def phi(r):
            r = np.asarray(r, dtype=float)
            flat = np.atleast_1d(r).ravel()
            out = np.empty(flat.shape)
            for i, rv in enumerate(flat):
                if rv == 0:
                    out[i] = 0.0
                    continue
                vals = self._interp(rv * nodes)
                ok = ~np.isnan(vals)
                if not np.any(ok):
                    raise OutOfDomain(f"no table ray admits scaling by {rv}")
                out[i] = np.max(vals[ok] / lx[ok])
                if out[i] > 1e12:
                    raise Delta2Violation(f"sampled ratio L(rx)/L(x) = {out[i]:.3g} at r = {rv}")
            return out.reshape(r.shape) if r.ndim else float(out[0])

        pm, pp, err = richardson_derivatives(phi)
        return YoungProfile(phi=phi, p_plus=pp, p_minus=pm, exact=False, p_error=err)


@dataclass
class ConjugateSpec:
    """Legendre transform ``L*(y) = sup_x <x, y> - L(x)`` of a cost."""

    cost: CostSpec
    _value: object = field(repr=False)
    _grad: object = field(repr=False)
    form: str = "analytic"
    domain_radius: float = np.inf

    def __call__(self, y):
        return self.value(as_points(y, self.cost.dim))

    def value(self, y):
        y = np.asarray(y, dtype=float)
        if np.isfinite(self.domain_radius) and np.any(np.linalg.norm(y, axis=-1) > self.domain_radius):
            raise OutOfDomain(f"|y| exceeds the table conjugate domain {self.domain_radius:.4g}")
        return self._value(y)

    def grad(self, y):
        return self._grad(np.asarray(y, dtype=float))


def richardson_derivatives(phi, h=1e-3):
    """One-sided derivatives of ``phi`` at 1 with two Richardson levels.

    Returns ``(p_minus, p_plus, error_estimate)``.
    """
    steps = np.array([h, h / 2.0, h / 4.0])
    right = (np.asarray(phi(1.0 + steps)) - 1.0) / steps
    left = (1.0 - np.asarray(phi(1.0 - steps))) / steps

    def extrapolate(d):
        r1a = 2.0 * d[1] - d[0]
        r1b = 2.0 * d[2] - d[1]
        return (4.0 * r1b - r1a) / 3.0, abs(r1b - r1a)

    pp, ep = extrapolate(right)
    pm, em = extrapolate(left)
    # convexity of phi forces 1 <= p_minus <= p_plus
    pm = max(pm, 1.0)
    pp = max(pp, pm)
    return float(pm), float(pp), float(max(ep, em))


class YoungProfile:
    """Young function ``Phi_L`` and the derived constants."""

    def __init__(self, phi, p_plus, p_minus, phi_inv=None, exact=False, p_error=0.0):
        self._phi = phi
        self._phi_inv = phi_inv
        self.p_plus = float(p_plus)
        self.p_minus = float(p_minus)
        self.exact = bool(exact)
        self.p_error = float(p_error)
        self.gamma = gamma(self.p_plus, self.p_minus)
        self.A_thm12 = float(self.phi(self.p_plus))
        self.A_thm13 = float(self.phi(self.p_plus) * self.phi(1.0 / self.gamma))

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("Phi is defined for r >= 0")
        out = self._phi(r)
        return float(out) if np.ndim(out) == 0 else out

    def psi(self, r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        out = np.where(r > 0, 1.0 / np.asarray(self._phi(1.0 / safe)), 0.0)
        return float(out) if out.ndim == 0 else out

    def phi_inv(self, s):
        s = np.asarray(s, dtype=float)
        if self._phi_inv is not None:
            out = self._phi_inv(s)
            return float(out) if np.ndim(out) == 0 else out
        # convexity with Phi(0)=0, Phi(1)=1 puts the root between s and 1
        flat = np.atleast_1d(s).ravel()
        logs = np.log(np.maximum(flat, 1e-300))
        lo = np.minimum(logs, 0.0) - 1e-12
        hi = np.maximum(logs, 0.0) + 1e-12
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = np.asarray(self._phi(np.exp(mid))) < flat
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo < 1e-15):
                break
        out = np.where(flat > 0, np.exp(0.5 * (lo + hi)), 0.0)
        return out.reshape(s.shape) if s.ndim else float(out[0])

    def phi_prime_right(self, r, h=1e-7):
        return (self.phi(r + h) - self.phi(r)) / h

    def tabulated(self, decades=8.0, n=8001):
        """Profile with ``Phi`` and ``Phi^{-1}`` read from one log-log table.

        Analytic profiles are returned unchanged. Otherwise ``log Phi`` is
        sampled once on ``n`` log-spaced radii in ``[10^-decades, 10^decades]``
        and interpolated monotonically (PCHIP) in both directions, with power
        laws ``r^{p_minus}`` / ``r^{p_plus}`` continuing the table at either end.
        The measured table error ``max |log Phi_table - log Phi|`` at cell
        midpoints is stored as ``table_error``. The result is cached.
        """
        if self.exact or self._phi_inv is not None:
            return self
        if getattr(self, "_table", None) is not None:
            return self._table
        logr = np.linspace(-decades, decades, n) * math.log(10.0)
        logphi = np.log(np.asarray(self._phi(np.exp(logr))))
        fwd = PchipInterpolator(logr, logphi, extrapolate=False)
        dfwd = fwd.derivative()

        def inv(lt):
            # invert the forward table exactly: Newton inside the bracketing cell
            k = np.clip(np.searchsorted(logphi, lt) - 1, 0, n - 2)
            lo, hi = logr[k], logr[k + 1]
            x = np.interp(lt, logphi, logr)
            for _ in range(50):
                step = (fwd(x) - lt) / dfwd(x)
                x = np.clip(x - step, lo, hi)
                if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(x))):
                    break
            return x
        lo_r, hi_r, lo_f, hi_f = logr[0], logr[-1], logphi[0], logphi[-1]
        pm, pp = self.p_minus, self.p_plus

        def phi(r):
            r = np.asarray(r, dtype=float)
            lr = np.log(np.where(r > 0, r, 1.0))
            inner = fwd(np.clip(lr, lo_r, hi_r))
            out = np.where(lr < lo_r, lo_f + pm * (lr - lo_r), np.where(lr > hi_r, hi_f + pp * (lr - hi_r), inner))
            return np.where(r > 0, np.exp(out), 0.0)

        def phi_inv(t):
            t = np.asarray(t, dtype=float)
            lt = np.log(np.where(t > 0, t, 1.0))
            inner = inv(np.clip(lt, lo_f, hi_f))
            out = np.where(lt < lo_f, lo_r + (lt - lo_f) / pm, np.where(lt > hi_f, hi_r + (lt - hi_f) / pp, inner))
            return np.where(t > 0, np.exp(out), 0.0)

        table = YoungProfile(phi, pp, pm, phi_inv=phi_inv, exact=False, p_error=self.p_error)
        # nodes where the table's second derivative jumps noticeably; away
        # from them Phi^{-1} is smooth to within rounding
        cc, hh = fwd.c, np.diff(logr)
        jump = np.abs(2.0 * cc[1, 1:] - (6.0 * cc[0, :-1] * hh[:-1] + 2.0 * cc[1, :-1]))
        table.inverse_breaks = logphi[1:-1][jump > 1e-7]
        mids = 0.5 * (logr[1:] + logr[:-1])[:: max(1, n // 400)]
        table.table_error = float(np.max(np.abs(np.log(np.asarray(self._phi(np.exp(mids)))) - fwd(mids))))
        self._table = table
        return table


def cost_from_dict(d):
    """Build a cost from its structured-text form."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "power":
        return PowerCost(d["p"], dim=d.get("dim", 1), norm=d.get("norm", "euclidean"),
                         norm_p=d.get("norm_p", 2.0), weights=d.get("weights"))
    if kind == "radial":
        return RadialCost(d["V"], dim=d.get("dim", 1))
    if kind == "blackbox":
        return BlackBoxCost(d["axes"], d["values"], convex=d.get("convex", True))
    raise InvalidSpec(f"unknown cost kind {kind!r}")


# ---------------------------------------------------------------------------
# operation-level API


def eval_cost(spec, x):
    return spec(x)


def legendre(spec):
    return spec.conjugate


def young_phi(spec, r):
    return spec.profile.phi(r)


def young_psi(spec, r):
    return spec.profile.psi(r)


def one_sided_derivatives(profile):
    """``(p_minus, p_plus)`` of a profile, exact where the profile is analytic."""
    return profile.p_minus, profile.p_plus


def radius_RL(spec, r):
    if np.any(np.asarray(r) < 0):
        raise ValueError("r must be nonnegative")
    return spec.radius(r)


@dataclass
class Delta2Diagnostic:
    sup_ratio: float
    location: np.ndarray
    bound: float
    passes: bool


def check_delta2(spec, n_radii=241, n_dirs=16, eps=1e-7):
    """Sampled ``sup <grad L(x), x> / L(x)`` along rays, against ``Phi'(1+)``."""
    if isinstance(spec, BlackBoxCost):
        x = spec.nodes[(spec.node_values > 0) & ~spec.boundary]
        eps = 1e-6
    else:
        radii = 10.0 ** np.linspace(-6.0, 6.0, n_radii)
        if spec.dim == 1:
            dirs = np.array([[1.0], [-1.0]])
        else:
            ang = 2 * np.pi * np.arange(n_dirs) / n_dirs
            dirs = np.zeros((n_dirs, spec.dim))
            dirs[:, 0], dirs[:, 1] = np.cos(ang), np.sin(ang)
        x = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, spec.dim)
    lx = spec.L(x)
    ratio = (spec.L((1.0 + eps) * x) - lx) / (eps * lx)
    k = int(np.argmax(ratio))
    bound = spec.profile.p_plus
    sup = float(ratio[k])
    return Delta2Diagnostic(sup, x[k], bound, sup <= bound * (1.0 + 1e-3))
