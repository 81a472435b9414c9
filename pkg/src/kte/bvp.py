"""Boundary-value problem for the interpolation profile ``theta``.

Given a Young function ``Phi`` and ``c > 0`` we look for ``delta > 0`` and an
increasing ``theta`` on ``[0, 1]`` with ``theta(0) = 0``, ``theta(1) = 1`` and

    (1 - theta) Phi(c theta' / (1 - theta)) = delta.

Writing ``theta = 1 - exp(-v)`` turns the equation into ``v' = Phi^{-1}(delta e^v) / c``,
so ``t`` as a function of ``v`` is the integral
``t(v) = c int_0^v dw / Phi^{-1}(delta e^w)``. The condition ``t(inf) = 1``
fixes ``delta``. All interpolation is done on ``v(t)``, which is smooth and
grows only logarithmically at ``t = 1``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import BPoly
from scipy.optimize import brentq

from .errors import QuadratureFailure

N_NODES = 2049
N_PROBES = 10_000
PROBE_END = 1.0 - 1e-4


def _tail_cutoff(delta, p_plus, c, tol):
    """Smallest ``v >= 0`` with ``c int_v^inf dw / Phi^{-1}(delta e^w) <= tol``.

    Uses ``Phi^{-1}(s) >= s^{1/p_plus}`` for ``s >= 1``.
    """
    # need delta e^v >= 1 and c p (delta e^v)^{-1/p} <= tol
    need = max(0.0, p_plus * math.log(c * p_plus / tol))
    return max(0.0, need - math.log(delta))


def _tail_bound(delta, p_plus, c, v):
    s = delta * math.exp(v)
    if s < 1.0:
        return math.inf
    return c * p_plus * s ** (-1.0 / p_plus)


def _breaks(profile, delta, a, b):
    """Points in ``(a, b)`` where ``x -> Phi^{-1}(delta e^x)`` is not smooth."""
    pts = [-math.log(delta)]
    extra = getattr(profile, "inverse_breaks", None)
    if extra is not None:
        pts = np.r_[pts, extra - math.log(delta)]
    pts = np.unique(np.asarray(pts, dtype=float))
    return pts[(pts > a) & (pts < b)]


def _gauss_pieces(fun, edges, order=20):
    x, wq = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)[:, None]
    half = 0.5 * (hi - lo)[:, None]
    return half[:, 0] * (fun(mid + half * x[None, :]) @ wq)


def _log_integral(profile, delta, x_end):
    """``int_0^{x_end} dx / Phi^{-1}(delta e^x)`` by adaptive quadrature, split at kinks."""
    fun = lambda x: 1.0 / float(profile.phi_inv(delta * math.exp(x)))
    edges = [0.0] + list(_breaks(profile, delta, 0.0, x_end)) + [x_end]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(fun, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)
        total += val
    return total


def delta_integral(delta, profile, tail_tol=1e-12):
    """``int_delta^inf ds / (s Phi^{-1}(s))`` with an analytic tail bound below ``tail_tol``."""
    profile = profile.tabulated()
    x_end = _tail_cutoff(delta, profile.p_plus, 1.0, tail_tol)
    return _log_integral(profile, delta, x_end)


def solve_delta(c, profile):
    """Constant ``delta(c)`` of the boundary-value problem.

    Parameters
    ----------
    c : float
        Positive parameter.
    profile : YoungProfile

    Returns
    -------
    float
        ``delta`` with ``int_delta^inf ds / (s Phi^{-1}(s)) = 1/c``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    profile = profile.tabulated()
    target = 1.0 / c
    g = lambda logd: delta_integral(math.exp(logd), profile) - target
    # the integral decreases in delta; bracket by doubling in log space
    lo, hi = -1.0, 1.0
    while g(lo) < 0:
        lo = 2.0 * lo - 1.0
    while g(hi) > 0:
        hi = 2.0 * hi + 1.0
    logd = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(logd)


def _elevate(b, degree):
    """Raise Bernstein coefficients ``b`` (rows) to ``degree``."""
    while b.shape[0] - 1 < degree:
        m = b.shape[0]
        i = np.arange(m + 1)[:, None] / m
        pad = np.zeros((1, b.shape[1]))
        b = i * np.r_[pad, b] + (1.0 - i) * np.r_[b, pad]
    return b


def _hermite(x, derivs, counts):
    """Piecewise Hermite interpolant through ``counts[k]`` derivatives at each node.

    ``derivs[i, k]`` is the ``i``-th derivative at ``x[k]``. Vectorized over
    intervals, grouped by the number of conditions at each end.
    """
    width = np.diff(x)
    na, nb = counts[:-1], counts[1:]
    top = int(np.max(na + nb)) - 1
    coef = np.empty((top + 1, width.size))
    for ka, kb in set(zip(na.tolist(), nb.tolist())):
        sel = np.nonzero((na == ka) & (nb == kb))[0]
        m = ka + kb - 1
        H = width[sel]
        b = np.empty((m + 1, sel.size))
        # forward differences of b at 0 and backward differences at m
        fwd = [derivs[i, sel] * H ** i * math.factorial(m - i) / math.factorial(m) for i in range(ka)]
        bwd = [derivs[i, sel + 1] * H ** i * math.factorial(m - i) / math.factorial(m) for i in range(kb)]
        for j in range(ka):
            b[j] = sum(math.comb(j, i) * fwd[i] for i in range(j + 1))
        for j in range(kb):
            b[m - j] = sum(math.comb(j, i) * (-1) ** i * bwd[i] for i in range(j + 1))
        coef[:, sel] = _elevate(b, top)
    return BPoly(coef, x)


@dataclass
class ThetaSolution:
    """Solution ``theta`` of the boundary-value problem on a node set in ``v = -log(1 - theta)``.

    ``tau_nodes`` hold the remaining time ``1 - t`` at each node. Working in
    ``tau`` keeps full relative precision close to ``t = 1``, where node
    spacings in ``t`` fall far below the resolution of doubles near 1.
    """

    c: float
    delta: float
    tau_nodes: np.ndarray
    v_nodes: np.ndarray
    profile: object = field(repr=False)
    residual_sup: float = math.nan
    R_one: float = math.nan
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        # Hermite data in tau (increasing): v, dv/dtau = -v', d2v/dtau2 = v''.
        # Where Phi^{-1} has a kink (delta e^v = 1, or a table break) v''
        # jumps, so those nodes carry only v and v', and v'' is differenced
        # on one side next to them.
        v = self.v_nodes[::-1]
        slope = self._slope(v)
        breaks = _breaks(self.profile, self.delta, -math.inf, math.inf)
        step = 1e-4
        # nearest break to every node, and the side of it the node sits on
        j = np.clip(np.searchsorted(breaks, v), 1, max(breaks.size - 1, 1))
        near_pt = breaks[j - 1] if breaks.size == 1 else np.where(
            np.abs(v - breaks[j - 1]) < np.abs(v - breaks[np.minimum(j, breaks.size - 1)]),
            breaks[j - 1], breaks[np.minimum(j, breaks.size - 1)])
        side = np.where(v >= near_pt, 1.0, -1.0)
        near = np.abs(v - near_pt) < 2.0 * step
        central = (self._slope(v + step) - self._slope(v - step)) / (2.0 * step)
        one_sided = side * (-3.0 * slope + 4.0 * self._slope(v + side * step)
                            - self._slope(v + 2.0 * side * step)) / (2.0 * step)
        dslope = np.where(near, one_sided, central)
        at_break = np.abs(v - near_pt) <= 1e-12 * np.maximum(1.0, np.abs(near_pt))
        derivs = np.stack([v, -slope, dslope * slope])
        self._poly = _hermite(self.tau_nodes[::-1], derivs, np.where(at_break, 2, 3))
        self._dpoly = self._poly.derivative()
        self._tau_end = float(self.tau_nodes[-1])
        self._tau_start = float(self.tau_nodes[0])

    @property
    def t_nodes(self):
        return 1.0 - self.tau_nodes

    def _slope(self, v):
        return np.asarray(self.profile.phi_inv(self.delta * np.exp(v))) / self.c

    def _tau(self, t):
        return np.clip(1.0 - np.asarray(t, dtype=float), self._tau_end, self._tau_start)

    def v(self, t):
        return self._poly(self._tau(t))

    def theta(self, t):
        t = np.asarray(t, dtype=float)
        out = -np.expm1(-self.v(t))
        # beyond the last node close the gap to 1 linearly
        end = -math.expm1(-float(self.v_nodes[-1]))
        late = (1.0 - t) < self._tau_end
        if np.any(late):
            frac = np.clip(1.0 - (1.0 - t) / self._tau_end, 0.0, 1.0)
            out = np.where(late, end + (1.0 - end) * frac, out)
        out = np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, out))
        return float(out) if out.ndim == 0 else out

    def theta_prime(self, t):
        tau = self._tau(t)
        out = -np.exp(-self._poly(tau)) * self._dpoly(tau)
        return float(out) if out.ndim == 0 else out

    def U(self, y):
        """``(1 - y) Phi^{-1}(delta / (1 - y)) / c`` for ``y`` in ``[0, 1)``."""
        y = np.asarray(y, dtype=float)
        return (1.0 - y) * np.asarray(self.profile.phi_inv(self.delta / (1.0 - y))) / self.c

    def integrand(self, t):
        """``(1 - theta) Phi(c theta' / (1 - theta))`` from the interpolant."""
        tau = self._tau(t)
        v = self._poly(tau)
        return np.exp(-v) * np.asarray(self.profile.phi(np.maximum(-self.c * self._dpoly(tau), 0.0)))

    def to_csv(self, path=None, n=1001):
        t = np.linspace(0.0, 1.0, n)
        lines = ["t,theta,theta_prime"] + [f"{a!r},{b!r},{d!r}" for a, b, d in
                                            zip(t.tolist(), np.atleast_1d(self.theta(t)).tolist(),
                                                np.atleast_1d(self.theta_prime(t)).tolist())]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _cell_times(profile, delta, c, v_nodes, order=16):
    """``c int dw / Phi^{-1}(delta e^w)`` over each cell between nodes.

    Gauss-Legendre with ``order`` points; cells where the half-order rule
    disagrees (kinks, tabulated profiles) are redone by adaptive quadrature.
    """
    fun = lambda w: 1.0 / np.asarray(profile.phi_inv(delta * np.exp(w)))

    def gauss(lo, hi, k):
        x, wq = np.polynomial.legendre.leggauss(k)
        mid = 0.5 * (lo + hi)[:, None]
        half = 0.5 * (hi - lo)[:, None]
        return half[:, 0] * (fun(mid + half * x[None, :]) @ wq)
    a, b = v_nodes[:-1], v_nodes[1:]
    part = gauss(a, b, order)
    rough = np.abs(part - gauss(a, b, order // 2)) > 1e-15 * np.maximum(np.abs(part), 1.0)
    for k in np.nonzero(rough)[0]:
        edges = np.r_[a[k], _breaks(profile, delta, a[k], b[k]), b[k]]
        part[k] = float(np.sum(_gauss_pieces(fun, edges)))
    return c * part


def solve_theta(c, profile, n_nodes=N_NODES, delta=None, tail_tol=1e-5):
    """Solve for ``theta`` and check it against the defining equation.

    Parameters
    ----------
    c : float
    profile : YoungProfile
    n_nodes : int
        Interpolation nodes, equally spaced in ``v``.
    delta : float, optional
        Precomputed ``solve_delta(c, profile)``.
    tail_tol : float
        The last node sits where ``1 - t`` is below this bound.

    Raises
    ------
    QuadratureFailure
        If the total time ``R(1)`` is not 1 within ``1e-7``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    # profiles without a closed form go through a cached log-log table
    profile = profile.tabulated()
    delta = solve_delta(c, profile) if delta is None else float(delta)
    v_end = _tail_cutoff(delta, profile.p_plus, c, tail_tol)
    v_nodes = np.linspace(0.0, v_end, n_nodes)
    # nodes exactly at the kinks of Phi^{-1}, and a denser patch around them
    kinks = _breaks(profile, delta, 1e-9, v_end - 1e-9)
    if kinks.size:
        base = np.unique(np.r_[v_nodes, kinks])
        patch = np.concatenate([np.linspace(k - 0.05, k + 0.05, 65) for k in kinks])
        gap = np.min(np.abs(patch[:, None] - base[None, :]), axis=1)
        patch = patch[(gap > 1e-6) & (patch > 0.0) & (patch < v_end)]
        v_nodes = np.unique(np.r_[base, patch])
    cells = _cell_times(profile, delta, c, v_nodes)
    # remaining time beyond the last node, integrated to below 1e-12
    far = _tail_cutoff(delta, profile.p_plus, c, 1e-12)
    rest = c * (_log_integral(profile, delta * math.exp(v_end), max(far - v_end, 0.0)))
    # remaining time 1 - t at each node, summed from the far end
    tau_nodes = rest + np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
    r_one = float(tau_nodes[0])
    if not abs(r_one - 1.0) <= 1e-7:
        raise QuadratureFailure(f"total time R(1) = {r_one!r} differs from 1")
    sol = ThetaSolution(c=float(c), delta=delta, tau_nodes=tau_nodes, v_nodes=v_nodes, profile=profile, R_one=r_one)
    probes = np.linspace(0.0, PROBE_END, N_PROBES)
    sol.residual_sup = float(np.max(np.abs(sol.integrand(probes) - delta)))
    sol.info = {"table_error": getattr(profile, "table_error", 0.0), "n_nodes": int(n_nodes), "v_end": float(v_end), "t_end": float(1.0 - tau_nodes[-1]),
                "tail_bound": _tail_bound(delta, profile.p_plus, c, v_end)}
    return sol


def interpolation_constant(theta_sol, profile=None):
    """``int_0^1 (1 - theta) Phi(c theta' / (1 - theta)) dt`` by the trapezoid rule.

    The probe grid covers ``[0, 1 - 1e-4]``; the final short piece uses the
    integrand value at the last probe, which is where the equation holds
    all the way to ``t = 1``.
    """
    sol = theta_sol
    profile = None if profile is None else profile.tabulated()
    if profile is not None and profile is not sol.profile:
        sol = ThetaSolution(sol.c, sol.delta, sol.tau_nodes, sol.v_nodes, profile)
    t = np.linspace(0.0, PROBE_END, N_PROBES)
    vals = sol.integrand(t)
    body = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t)))
    return body + float(vals[-1]) * (1.0 - PROBE_END)
