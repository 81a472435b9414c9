"""Infimum-convolution (Hopf-Lax) operators on grids.

``Q_t f(x) = min_y f(y) + t L((x - y) / t)`` with ``y`` ranging over grid
nodes. For bounded ``f`` (``|f| <= M``) a minimizer lies in the ball of radius
``t R_L(2M/t)`` around ``x``, so only that window is searched.
"""

import warnings

import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import maximum_filter

from . import _kernels
from .errors import NotSuperlinear, WindowExceedsGrid
from .grid import GridField
from .measures import DiscreteMeasure


def window_radius(f, spec, t):
    """Euclidean search radius ``t R_L(2M/t)`` for ``f`` and time ``t``."""
    if not t > 0:
        raise ValueError("t must be positive")
    if not spec.is_superlinear:
        raise NotSuperlinear("a finite search window needs a superlinear cost")
    M = f.M
    if M == 0.0:
        return 0.0
    return float(t * spec.radius(2.0 * M / t))


def _stencil(grid, radius):
    """Integer offsets with ``|k h| <= radius``, ordered so source indices ascend."""
    slack = 1.0 + 1e-9
    half = [int(np.floor(radius * slack / h)) for h in grid.h]
    if grid.dim == 1:
        k = np.arange(half[0], -half[0] - 1, -1)
        return k[:, None], half
    k0, k1 = np.meshgrid(np.arange(half[0], -half[0] - 1, -1), np.arange(half[1], -half[1] - 1, -1), indexing="ij")
    off = np.stack([k0.ravel(), k1.ravel()], axis=1)
    dist = np.hypot(off[:, 0] * grid.h[0], off[:, 1] * grid.h[1])
    return off[dist <= radius * slack], half


def _full_stencil(grid):
    half = [n - 1 for n in grid.n]
    if grid.dim == 1:
        return np.arange(half[0], -half[0] - 1, -1)[:, None], half
    k0, k1 = np.meshgrid(np.arange(half[0], -half[0] - 1, -1), np.arange(half[1], -half[1] - 1, -1), indexing="ij")
    return np.stack([k0.ravel(), k1.ravel()], axis=1), half


def inf_convolve(f, spec, t, window="auto", return_argmin=False, warn=True):
    """Hopf-Lax operator ``Q_t f`` restricted to grid nodes.

    Parameters
    ----------
    f : GridField
        Scalar field.
    spec : CostSpec
        Superlinear cost with ``spec.dim == f.dim``.
    t : float
        Positive time.
    window : {"auto", "full"}
        ``"full"`` searches every node (used to validate the window).
    return_argmin : bool
        Also return the flat index of the minimizing node.

    Returns
    -------
    GridField
        ``Q_t f`` with ``flags`` marking nodes whose window was clipped by
        the boundary or that can see an already flagged input node.
    """
    if f.is_vector:
        raise ValueError("inf_convolve needs a scalar field")
    if spec.dim != f.dim:
        raise ValueError(f"cost dimension {spec.dim} != grid dimension {f.dim}")
    if window == "full":
        if not t > 0:
            raise ValueError("t must be positive")
        off, half = _full_stencil(f)
    else:
        off, half = _stencil(f, window_radius(f, spec, t))
    disp = off * np.asarray(f.h)[None, :]
    kv = t * spec.L(disp / t)
    vals, arg = _kernels.minplus(f.values, off, kv)

    clipped = np.zeros(f.n, dtype=bool)
    for ax in range(f.dim):
        idx = np.arange(f.n[ax])
        bad = (idx < half[ax]) | (idx > f.n[ax] - 1 - half[ax])
        shape = [1] * f.dim
        shape[ax] = f.n[ax]
        clipped |= bad.reshape(shape)
    flags = clipped.copy()
    if window != "full" and np.any(f.flags):
        footprint = np.zeros([2 * h + 1 for h in half], dtype=bool)
        footprint[tuple((off + np.asarray(half)).T)] = True
        flags |= maximum_filter(f.flags, footprint=footprint, mode="constant", cval=False)
    if window == "full":
        flags = f.flags.copy()
    if warn and window != "full" and np.any(clipped):
        warnings.warn(f"Hopf-Lax window clipped at {int(clipped.sum())} nodes", WindowExceedsGrid, stacklevel=2)
    out = GridField(f.origin, f.h, f.n, vals, flags)
    if return_argmin:
        return out, arg
    return out


def _quiet(fun, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WindowExceedsGrid)
        return fun(*args, **kwargs)


def semigroup_residual(f, spec, t, s):
    """Sup-norm of ``Q_{t+s} f - Q_t(Q_s f)`` over unflagged nodes."""
    direct = _quiet(inf_convolve, f, spec, t + s)
    composed = _quiet(inf_convolve, _quiet(inf_convolve, f, spec, s), spec, t)
    ok = ~(direct.flags | composed.flags)
    if not np.any(ok):
        return float("nan")
    return float(np.max(np.abs(direct.values - composed.values)[ok]))


def generator_probe(f, spec, eps):
    """``(Q_eps f - f)/eps + L*(grad f)``, flagged on the boundary ring and clipped nodes."""
    conj = spec.conjugate
    q = _quiet(inf_convolve, f, spec, eps)
    grad = f.gradient().values
    vals = (q.values - f.values) / eps + conj.value(grad)
    flags = q.flags | ~f.interior_mask()
    return GridField(f.origin, f.h, f.n, vals, flags)


def hj_residual(f, spec, t, dt):
    """Discrete Hamilton-Jacobi residual ``du/dt + L*(grad u)`` at time ``t``."""
    if not (t > dt > 0):
        raise ValueError("need t > dt > 0")
    conj = spec.conjugate
    up = _quiet(inf_convolve, f, spec, t + dt)
    down = _quiet(inf_convolve, f, spec, t - dt)
    mid = _quiet(inf_convolve, f, spec, t)
    vals = (up.values - down.values) / (2.0 * dt) + conj.value(mid.gradient().values)
    flags = up.flags | down.flags | mid.flags | ~f.interior_mask()
    return GridField(f.origin, f.h, f.n, vals, flags)


def node_weights(grid, nu):
    """Weights of ``nu`` on the nodes of ``grid`` (``nu`` a measure on nodes or an array)."""
    if not isinstance(nu, DiscreteMeasure):
        w = np.asarray(nu, dtype=float)
        return w.reshape(grid.n)
    idx = np.rint((nu.points - np.asarray(grid.origin)) / np.asarray(grid.h)).astype(np.int64)
    back = np.asarray(grid.origin) + idx * np.asarray(grid.h)
    if np.any(idx < 0) or np.any(idx >= np.asarray(grid.n)) or not np.allclose(back, nu.points, atol=1e-9 * max(grid.h)):
        raise ValueError("measure is not supported on grid nodes")
    w = np.zeros(grid.n)
    np.add.at(w, tuple(idx.T), nu.weights)
    return w


def interpolation_check(f, spec, nu, t, steps):
    """Compare ``int (Q_t f - f) dnu`` with ``-int_0^t int L*(grad Q_s f) dnu ds``.

    The time integral is a trapezoid rule over ``steps`` equal slices.
    Returns a dict with ``lhs``, ``rhs`` and ``gap``.
    """
    conj = spec.conjugate
    w = node_weights(f, nu)
    times = np.linspace(0.0, t, steps + 1)
    integrand = np.empty(steps + 1)
    last = f
    for k, s in enumerate(times):
        q = f if s == 0.0 else _quiet(inf_convolve, f, spec, s)
        integrand[k] = float(np.sum(w * conj.value(q.gradient().values)))
        last = q
    lhs = float(np.sum(w * (last.values - f.values)))
    rhs = -float(trapezoid(integrand, times))
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}
