"""Exact optimal transport between finitely supported measures.

The cost of moving ``x`` (from ``mu``) to ``y`` (from ``nu``) is ``L(x - y)``.
``solve_ot`` runs a transportation simplex on the bipartite graph: a spanning
tree basis, node potentials from the tree, Dantzig pricing, and Bland's rule
after a run of degenerate pivots.
"""

from collections import deque
from dataclasses import dataclass, field
import warnings

import numpy as np

from . import _kernels
from .errors import SizeLimit, WindowExceedsGrid
from .grid import GridField
from .hopf_lax import inf_convolve, node_weights
from .measures import DiscreteMeasure

MAX_ENTRIES = 10_000_000


@dataclass
class TransportPlan:
    """Sparse coupling with dual potentials ``f`` (on ``mu``) and ``g`` (on ``nu``)."""

    mu: DiscreteMeasure
    nu: DiscreteMeasure
    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    cost: float
    f: np.ndarray
    g: np.ndarray
    pivots: int = 0
    info: dict = field(default_factory=dict)

    @property
    def dual_value(self):
        return float(np.dot(self.mu.weights, self.f) + np.dot(self.nu.weights, self.g))

    @property
    def duality_gap(self):
        return abs(self.cost - self.dual_value)

    def dense(self):
        out = np.zeros((len(self.mu), len(self.nu)))
        np.add.at(out, (self.rows, self.cols), self.mass)
        return out

    def to_csv(self, path=None):
        lines = ["i,j,mass"] + [f"{i},{j},{m!r}" for i, j, m in zip(self.rows, self.cols, self.mass.tolist())]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def cost_matrix(mu, nu, spec):
    m, k = len(mu), len(nu)
    if m * k > MAX_ENTRIES:
        raise SizeLimit(f"{m} x {k} cost matrix exceeds {MAX_ENTRIES} entries")
    diff = mu.points[:, None, :] - nu.points[None, :, :]
    return np.ascontiguousarray(spec.L(diff))


def _northwest_corner(a, b):
    a, b = a.copy(), b.copy()
    m, k = a.size, b.size
    cells, flows = [], []
    i = j = 0
    while True:
        x = min(a[i], b[j])
        cells.append((i, j))
        flows.append(x)
        a[i] -= x
        b[j] -= x
        if i == m - 1 and j == k - 1:
            break
        if (a[i] <= b[j] and i < m - 1) or j == k - 1:
            i += 1
        else:
            j += 1
    return cells, flows


class _Basis:
    """Spanning-tree basis over ``m`` row nodes and ``k`` column nodes (offset ``m``)."""

    def __init__(self, m, k, cells, flows):
        self.m, self.k = m, k
        self.adj = [set() for _ in range(m + k)]
        self.flow = {}
        for (i, j), x in zip(cells, flows):
            self.add(i, j, x)

    def add(self, i, j, x):
        self.flow[(i, j)] = x
        self.adj[i].add(self.m + j)
        self.adj[self.m + j].add(i)

    def remove(self, i, j):
        del self.flow[(i, j)]
        self.adj[i].discard(self.m + j)
        self.adj[self.m + j].discard(i)

    def potentials(self, C):
        m = self.m
        u = np.zeros(m)
        v = np.zeros(self.k)
        seen = np.zeros(m + self.k, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            a = queue.popleft()
            for b in sorted(self.adj[a]):
                if seen[b]:
                    continue
                seen[b] = True
                if a < m:
                    v[b - m] = C[a, b - m] - u[a]
                else:
                    u[b] = C[b, a - m] - v[a - m]
                queue.append(b)
        return u, v

    def path(self, src, dst):
        """Node path from ``src`` to ``dst`` in the tree."""
        parent = {src: -1}
        queue = deque([src])
        while queue:
            a = queue.popleft()
            if a == dst:
                break
            for b in sorted(self.adj[a]):
                if b not in parent:
                    parent[b] = a
                    queue.append(b)
        out = [dst]
        while out[-1] != src:
            out.append(parent[out[-1]])
        return out[::-1]


def _cell(m, a, b):
    return (a, b - m) if a < m else (b, a - m)


def _simplex(C, a, b, max_pivots=None, tol=None):
    m, k = C.shape
    cells, flows = _northwest_corner(a, b)
    basis = _Basis(m, k, cells, flows)
    scale = 1.0 + float(np.max(np.abs(C)))
    tol = 1e-12 * scale if tol is None else tol
    max_pivots = 50 * (m + k) * max(m, k) if max_pivots is None else max_pivots
    degenerate_run = 0
    bland = False
    pivots = 0
    while True:
        u, v = basis.potentials(C)
        if bland:
            i, j, r = _kernels.price(C, u, v, rule="bland", tol=tol)
        else:
            i, j, r = _kernels.price(C, u, v, rule="dantzig")
            if r >= -tol:
                i = -1
        if i < 0:
            return basis, u, v, pivots
        if pivots >= max_pivots:
            raise RuntimeError("transportation simplex did not converge")
        # cycle: entering arc (+), then alternate signs along the tree path col j -> row i
        nodes = basis.path(m + j, i)
        arcs = [_cell(m, nodes[s], nodes[s + 1]) for s in range(len(nodes) - 1)]
        minus = arcs[0::2]
        plus = arcs[1::2]
        theta = min(basis.flow[c] for c in minus)
        leaving = min(c for c in minus if basis.flow[c] == theta)
        for c in minus:
            basis.flow[c] -= theta
        for c in plus:
            basis.flow[c] += theta
        basis.remove(*leaving)
        basis.add(i, j, theta)
        pivots += 1
        if theta == 0.0:
            degenerate_run += 1
            if degenerate_run > 2 * (m + k):
                bland = True
        else:
            degenerate_run = 0


def solve_ot(mu, nu, spec):
    """Optimal coupling of ``mu`` and ``nu`` for the cost ``L(x - y)``.

    Returns
    -------
    TransportPlan
        An optimal basic plan and potentials with ``f_i + g_j <= L(x_i - y_j)``
        and equality on the support of the plan.
    """
    if mu.dim != spec.dim or nu.dim != spec.dim:
        raise ValueError("measure and cost dimensions differ")
    m, k = len(mu), len(nu)
    if m * k > MAX_ENTRIES:
        raise SizeLimit(f"{m} x {k} problem exceeds {MAX_ENTRIES} entries")
    if m == 1 and k == 1:
        c = float(spec.L(mu.points - nu.points)[0])
        return TransportPlan(mu, nu, np.array([0]), np.array([0]), np.array([1.0]), c,
                             np.array([0.0]), np.array([c]), info={"path": "dirac"})
    if m == k and np.array_equal(mu.points, nu.points) and np.array_equal(mu.weights, nu.weights):
        diag = float(spec.L(np.zeros((1, spec.dim)))[0])
        idx = np.arange(m)
        # zero potentials are feasible because L >= 0 = L(0)
        return TransportPlan(mu, nu, idx, idx.copy(), mu.weights.copy(), diag * 1.0,
                             np.zeros(m), np.zeros(k), info={"path": "identical"})
    C = cost_matrix(mu, nu, spec)
    basis, u, v, pivots = _simplex(C, mu.weights, nu.weights)
    cells = sorted(basis.flow)
    rows = np.array([c[0] for c in cells], dtype=np.int64)
    cols = np.array([c[1] for c in cells], dtype=np.int64)
    mass = np.array([basis.flow[c] for c in cells])
    keep = mass > 0.0
    rows, cols, mass = rows[keep], cols[keep], mass[keep]
    cost = float(np.sum(mass * C[rows, cols]))
    return TransportPlan(mu, nu, rows, cols, mass, cost, u, v, pivots,
                         info={"path": "simplex", "min_reduced_cost": float(np.min(C - u[:, None] - v[None, :]))})


def ot_1d_monotone(mu, nu, spec):
    """Quantile (monotone) coupling of two measures on the line.

    Returns ``{"cost", "plan"}`` with the plan as ``(x, y, mass)`` rows.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("monotone coupling needs 1D measures")
    ia = np.argsort(mu.points[:, 0], kind="stable")
    ib = np.argsort(nu.points[:, 0], kind="stable")
    xa, wa = mu.points[ia, 0], mu.weights[ia]
    xb, wb = nu.points[ib, 0], nu.weights[ib]
    ca = np.cumsum(wa)
    cb = np.cumsum(wb)
    ca[-1] = cb[-1] = 1.0
    cuts = np.union1d(ca, cb)
    lo = np.concatenate([[0.0], cuts[:-1]])
    mass = cuts - lo
    keep = mass > 0
    mid_hi = cuts[keep]
    mass = mass[keep]
    # the slice (lo, hi] belongs to the first atom whose cumulative weight reaches hi
    ka = np.minimum(np.searchsorted(ca, mid_hi - 0.5 * mass), xa.size - 1)
    kb = np.minimum(np.searchsorted(cb, mid_hi - 0.5 * mass), xb.size - 1)
    x, y = xa[ka], xb[kb]
    cost = float(np.sum(mass * spec.L((x - y)[:, None])))
    return {"cost": cost, "plan": np.stack([x, y, mass], axis=1)}


def support_optimality_check(plan, spec, tol=1e-8, mass_floor=1e-12):
    """Complementary slackness: ``f_i + g_j = L(x_i - y_j)`` wherever the plan has mass."""
    on = plan.mass > mass_floor
    r, c = plan.rows[on], plan.cols[on]
    cost = spec.L(plan.mu.points[r] - plan.nu.points[c])
    return bool(np.all(np.abs(plan.f[r] + plan.g[c] - cost) <= tol))


def potentials_feasible(plan, spec, tol=1e-9):
    C = cost_matrix(plan.mu, plan.nu, spec)
    return bool(np.all(plan.f[:, None] + plan.g[None, :] <= C + tol))


def dual_via_hopf_lax(f, mu, nu, spec):
    """Lower bound on the transport cost from ``mu`` to ``nu`` built from a grid potential.

    The pair ``(-f, Q_1 f)`` with ``Q_1`` taken for the reflected cost
    ``x -> L(-x)`` is dual-feasible for the cost ``L(x - y)``, so
    ``int Q_1 f dnu - int f dmu`` never exceeds the optimal cost.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WindowExceedsGrid)
        q = inf_convolve(f, spec.reflected(), 1.0)
    wm = node_weights(f, mu)
    wn = node_weights(f, nu)
    return float(np.sum(wn * q.values) - np.sum(wm * f.values))


def monotone_certificate(mu, nu, spec):
    """Monotone coupling of two 1D measures together with dual potentials.

    Potentials are propagated along the staircase support of the coupling;
    where the staircase breaks (a tie in the cumulative weights) the next row
    potential is the c-transform of the column potentials found so far.

    Returns
    -------
    dict
        ``cost``, ``f``, ``g`` (indexed like the atoms of ``mu`` and ``nu``),
        ``dual_value``, ``duality_gap`` and ``max_violation`` of
        ``f_i + g_j <= L(x_i - y_j)``.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("monotone coupling needs 1D measures")
    ia = np.argsort(mu.points[:, 0], kind="stable")
    ib = np.argsort(nu.points[:, 0], kind="stable")
    wa, wb = mu.weights[ia], nu.weights[ib]
    C = cost_matrix(DiscreteMeasure(mu.points[ia], wa, check_distinct=False),
                    DiscreteMeasure(nu.points[ib], wb, check_distinct=False), spec)
    m, k = wa.size, wb.size
    f = np.full(m, np.nan)
    g = np.full(k, np.nan)
    ra, rb = wa.copy(), wb.copy()
    i = j = 0
    cost = 0.0
    f[0] = 0.0
    g[0] = C[0, 0]
    while True:
        x = min(ra[i], rb[j])
        cost += x * C[i, j]
        ra[i] -= x
        rb[j] -= x
        if i == m - 1 and j == k - 1:
            break
        row_done = ra[i] <= rb[j] and i < m - 1
        col_done = rb[j] <= ra[i] and j < k - 1
        if j == k - 1:
            row_done, col_done = True, False
        elif i == m - 1:
            row_done, col_done = False, True
        if row_done and col_done:
            # staircase breaks: restart from the c-transform
            i += 1
            f[i] = float(np.min(C[i, : j + 1] - g[: j + 1]))
            j += 1
            g[j] = C[i, j] - f[i]
        elif row_done:
            i += 1
            f[i] = C[i, j] - g[j]
        else:
            j += 1
            g[j] = C[i, j] - f[i]
    dual = float(np.dot(wa, f) + np.dot(wb, g))
    viol = float(np.max(f[:, None] + g[None, :] - C))
    fo = np.empty(m)
    go = np.empty(k)
    fo[ia], go[ib] = f, g
    return {"cost": float(cost), "f": fo, "g": go, "dual_value": dual,
            "duality_gap": abs(float(cost) - dual), "max_violation": viol}
