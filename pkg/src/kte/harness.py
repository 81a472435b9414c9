"""End-to-end checks of the transport-entropy bounds on gridded measures.

Each case draws a pair of strictly positive node densities, solves the
transport problem exactly and compares it with the dual Sobolev norm of
``nu - mu`` (reference measure ``mu``) pushed through the bound's constant.
Reports are plain dicts serialised one JSON object per line.
"""

from dataclasses import dataclass, field
import json
import math
import os
import re
import time

import numpy as np

from . import bvp
from .convex_cost import PowerCost
from .errors import PreconditionViolation
from .grid import GridField, gaussian_smooth
from .hopf_lax import _quiet, inf_convolve
from .measures import DiscreteMeasure
from .orlicz import luxemburg_weighted
from .sobolev_dual import (DualNormProblem, apply_gradient, dual_sobolev_norm, dual_sobolev_norm_1d_p,
                           element_gradient, element_weights, orlicz_factor)
from .transport import monotone_certificate, solve_ot

WEIGHT_FLOOR = 1e-8
THEOREMS = ("T11", "T12", "T13")


# ---------------------------------------------------------------------------
# grids and seeds


def parse_grid(text):
    """Grid from ``"N=256,range=[-2,2]"`` (1D) or ``"N=32x32,range=[-2,2]"`` (square 2D)."""
    m = re.fullmatch(r"\s*N=(\d+)(?:x(\d+))?\s*,\s*range=\[\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\]\s*", text)
    if not m:
        raise ValueError(f"cannot parse grid {text!r}")
    n0 = int(m.group(1))
    lo, hi = float(m.group(3)), float(m.group(4))
    if m.group(2) is None:
        return GridField.on_interval(lo, hi, n0)
    n1 = int(m.group(2))
    return GridField([lo, lo], [(hi - lo) / (n0 - 1), (hi - lo) / (n1 - 1)], [n0, n1], np.zeros((n0, n1)))


def grid_params(grid):
    return {"origin": list(grid.origin), "h": list(grid.h), "n": list(grid.n)}


def master_seed(default=0):
    """Master seed, overridden by the ``KTE_SEED`` environment variable."""
    raw = os.environ.get("KTE_SEED")
    return int(raw) if raw not in (None, "") else int(default)


def case_rng(seed, master=None):
    master = master_seed() if master is None else master
    return np.random.default_rng(np.random.SeedSequence([int(master), int(seed)]))


# ---------------------------------------------------------------------------
# measure generation


@dataclass
class MeasurePair:
    """Node weights of ``mu`` and ``nu`` on ``grid``; unpacks as ``mu, nu``."""

    mu: np.ndarray
    nu: np.ndarray
    grid: GridField
    moment: float = math.nan
    kind: str = ""
    seed: int = 0

    def __iter__(self):
        return iter((self.mu, self.nu))

    def measures(self):
        pts = self.grid.flat_points()
        return (DiscreteMeasure(pts, self.mu.ravel(), check_distinct=False),
                DiscreteMeasure(pts, self.nu.ravel(), check_distinct=False))


def _floor(raw):
    raw = np.maximum(np.asarray(raw, dtype=float), 0.0)
    raw = raw / raw.sum()
    return (raw + WEIGHT_FLOOR) / (1.0 + raw.size * WEIGHT_FLOOR)


def _bumps(rng, pts, lo, hi, count):
    span = hi - lo
    out = np.zeros(pts.shape[:-1])
    for _ in range(count):
        centre = rng.uniform(lo + 0.2 * span, hi - 0.2 * span, size=pts.shape[-1])
        width = rng.uniform(0.05, 0.2) * span
        out += rng.uniform(0.5, 1.5) * np.exp(-0.5 * np.sum((pts - centre) ** 2, axis=-1) / width ** 2)
    return out


def _pwconst(rng, grid):
    out = np.ones(grid.n)
    for ax in range(grid.dim):
        pieces = int(rng.integers(4, 9))
        cuts = np.sort(rng.choice(np.arange(1, grid.n[ax]), size=pieces - 1, replace=False))
        levels = rng.uniform(0.2, 2.0, size=pieces)
        prof = np.repeat(levels, np.diff(np.r_[0, cuts, grid.n[ax]]))
        shape = [1] * grid.dim
        shape[ax] = grid.n[ax]
        out = out * prof.reshape(shape)
    return out


def gen_measures(seed, kind, grid, spec=None, master=None):
    """Deterministic pair of strictly positive node densities.

    Parameters
    ----------
    seed : int
        Case seed, combined with the master seed (see :func:`master_seed`).
    kind : {"bumps", "mixture", "pwconst"}
        ``bumps``: two Gaussian bumps each; ``mixture``: three to five bumps
        with random weights; ``pwconst``: random piecewise-constant levels.
    grid : GridField
    spec : CostSpec, optional
        When given, the moment ``sum mu_i nu_j L(x_i - y_j)`` is recorded.

    Returns
    -------
    MeasurePair
    """
    rng = case_rng(seed, master)
    pts = grid.points()
    lo = min(a[0] for a in grid.axes())
    hi = max(a[-1] for a in grid.axes())
    if kind == "bumps":
        raw = [_bumps(rng, pts, lo, hi, 2) for _ in range(2)]
    elif kind == "mixture":
        raw = [_bumps(rng, pts, lo, hi, int(rng.integers(3, 6))) for _ in range(2)]
    elif kind == "pwconst":
        raw = [_pwconst(rng, grid) for _ in range(2)]
    else:
        raise ValueError(f"unknown kind {kind!r}")
    mu, nu = (_floor(r) for r in raw)
    pair = MeasurePair(mu, nu, grid, kind=kind, seed=int(seed))
    if spec is not None:
        pair.moment = moment(mu, nu, grid, spec)
    return pair


def moment(mu, nu, grid, spec, chunk=2048):
    """``sum_ij mu_i nu_j L(x_i - y_j)``, accumulated in row blocks."""
    pts = grid.flat_points()
    a, b = np.ravel(mu), np.ravel(nu)
    total = 0.0
    for s in range(0, pts.shape[0], chunk):
        diff = pts[s:s + chunk, None, :] - pts[None, :, :]
        total += float(a[s:s + chunk] @ spec.L(diff) @ b)
    return total


def smooth(mu, eps, h):
    """Gaussian smoothing of node weights with standard deviation ``eps`` (mass preserving)."""
    return gaussian_smooth(mu, h, eps)


# ---------------------------------------------------------------------------
# reports


@dataclass
class VerificationReport:
    case_id: str
    theorem: str
    cost: dict
    grid: dict
    lhs: float
    rhs: float
    constants: dict
    slack: float
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def tol(self):
        return 1e-6 * (1.0 + abs(self.rhs)) + self.slack

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        return bool(self.margin >= -self.tol)

    def to_dict(self, include_time=True):
        out = {"case_id": self.case_id, "theorem": self.theorem, "cost": self.cost, "grid": self.grid,
               "lhs": self.lhs, "rhs": self.rhs, "constants": self.constants, "margin": self.margin,
               "slack": self.slack, "tol": self.tol, "pass": self.passed, "diagnostics": self.diagnostics}
        if include_time:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_time=True):
        return json.dumps(_plain(self.to_dict(include_time)), sort_keys=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_reports(reports, path):
    with open(path, "w") as fh:
        for r in sorted(reports, key=lambda r: r.case_id):
            fh.write(r.to_json() + "\n")


# ---------------------------------------------------------------------------
# energy bounds


def _check_preconditions(mu, spec, theorem):
    if theorem not in THEOREMS:
        raise ValueError(f"theorem must be one of {THEOREMS}")
    if theorem == "T11" and not isinstance(spec, PowerCost):
        raise PreconditionViolation("power_cost", "T11 needs a power cost |x|^p")
    if np.any(np.asarray(mu) <= 0):
        raise PreconditionViolation("mu_positive", "mu must have strictly positive weight at every node")
    if theorem == "T13" and not spec.profile.p_minus > 1.0:
        raise PreconditionViolation("p_minus_gt_1", f"p_minus = {spec.profile.p_minus} must exceed 1")


def _lhs(mu, nu, grid, spec):
    """Exact transport cost with certificates."""
    a, b = (DiscreteMeasure(grid.flat_points(), np.ravel(w), check_distinct=False) for w in (mu, nu))
    plan = solve_ot(a, b, spec)
    diag = {"duality_gap": plan.duality_gap, "simplex_pivots": plan.pivots}
    if grid.dim == 1:
        cert = monotone_certificate(a, b, spec)
        diag["oracle_cost"] = cert["cost"]
        diag["oracle_gap"] = cert["duality_gap"]
        diag["oracle_max_violation"] = cert["max_violation"]
    return plan.cost, diag


def verify_energy_bound(mu, nu, spec, theorem, grid, case_id="case", slack=0.0, method="auto",
                        restarts=2, crosscheck=False):
    """Compare the transport cost from ``mu`` to ``nu`` with the theorem's bound.

    Parameters
    ----------
    mu, nu : ndarray
        Node weights on ``grid``.
    spec : CostSpec
    theorem : {"T11", "T12", "T13"}
        ``T11``: ``W_p <= p ||nu - mu||_{H^{-1,p}(mu)}`` (power costs).
        ``T12``/``T13``: ``T_L <= A Phi(||nu - mu||_{H^{-1,L}(mu)})`` with
        ``A = Phi(p_plus)`` or ``A = Phi(p_plus) Phi(1/gamma)``.
    slack : float
        Declared discretization slack added to the tolerance.
    crosscheck : bool
        Also run the ascent solver (and the closed form for 1D power costs).

    Raises
    ------
    PreconditionViolation
        With ``clause`` naming the failed requirement.
    """
    t0 = time.perf_counter()
    _check_preconditions(mu, spec, theorem)
    cost, diag = _lhs(mu, nu, grid, spec)
    prob = DualNormProblem.on_grid(grid, mu, nu, mu, spec)
    res = dual_sobolev_norm(prob, method=method, restarts=restarts)
    diag.update({"norm_method": res.method, "witness_value": res.value, "witness_constraint": res.constraint,
                 "ascent_restarts": res.info.get("restarts", 0)})
    if crosscheck:
        alt = dual_sobolev_norm(prob, method="ascent", restarts=restarts)
        diag["norm_ascent"] = alt.value
    prof = spec.profile
    constants = {"p_plus": prof.p_plus, "p_minus": prof.p_minus, "gamma": prof.gamma}
    if theorem == "T11":
        p = spec.p
        norm = res.value / orlicz_factor(p)
        lhs = cost ** (1.0 / p)
        rhs = p * norm
        constants.update({"p": p, "A": p ** p, "norm_scale": orlicz_factor(p)})
        if crosscheck and grid.dim == 1:
            diag["norm_closed_form"] = dual_sobolev_norm_1d_p(mu, nu, mu, p, grid.h[0])
    else:
        A = prof.A_thm12 if theorem == "T12" else prof.A_thm13
        norm = res.value
        lhs = cost
        rhs = A * float(prof.phi(norm))
        constants.update({"A": A})
        if norm > 0:
            constants["delta"] = bvp.solve_delta(norm, prof)
    diag["norm"] = norm
    cost_dict = spec.to_dict()
    return VerificationReport(case_id=str(case_id), theorem=theorem, cost=cost_dict, grid=grid_params(grid),
                              lhs=float(lhs), rhs=float(rhs), constants=constants, slack=float(slack),
                              diagnostics=diag, wall_time=time.perf_counter() - t0)


def run_cases(spec, theorem, grid, seeds, kinds=("bumps", "mixture", "pwconst"), **kwargs):
    """One report per seed; the measure kind cycles with the seed."""
    reports = []
    for s in seeds:
        kind = kinds[int(s) % len(kinds)]
        mu, nu = gen_measures(s, kind, grid)
        rep = verify_energy_bound(mu, nu, spec, theorem, grid, case_id=f"{theorem}-{int(s):05d}-{kind}", **kwargs)
        rep.diagnostics["kind"] = kind
        rep.diagnostics["weight_floor"] = WEIGHT_FLOOR
        reports.append(rep)
    return reports


# ---------------------------------------------------------------------------
# interpolation audit


def _grad_norms(f_vals, ops, w, spec):
    g = apply_gradient(ops, f_vals.ravel())
    lux = luxemburg_weighted(g, w, _ConjugateAsCost(spec)) if np.any(g) else 0.0
    integral = float(np.dot(w, spec.conjugate.value(g)))
    return lux, integral


class _ConjugateAsCost:
    """Expose ``L*`` through the ``L`` interface expected by the Luxemburg solver."""

    def __init__(self, spec):
        self.conj = spec.conjugate
        self.dim = spec.dim

    def L(self, x):
        return self.conj.value(x)


def verify_ledoux_interpolation(f, mu, nu, spec, theta_sol=None, c=None, slices=64, slack=None):
    """Numerical audit of the interpolation argument behind the energy bound.

    Evaluates ``I(f) = int Q_1 f dnu - int f dmu`` and the chain

    ``int_0^1 I_t dt`` with ``I_t = c theta' ||grad Q_t f||_{L*(mu)} - (1 - theta) int L*(grad Q_t f) dmu``,
    then ``int_0^1 (1 - theta) Phi(c theta' / (1 - theta)) dt``,

    where ``c`` is the dual norm of ``nu - mu`` with reference ``mu``. Time
    integrals use the trapezoid rule over ``slices`` equal steps.

    Returns
    -------
    dict
        ``chain_values`` (``I``, ``int_I_t``, ``bound``), per-slice arrays,
        ``slack``, ``margin`` and ``pass`` (``I <= bound + slack``).
    """
    mu = np.asarray(mu, dtype=float).reshape(f.n)
    nu = np.asarray(nu, dtype=float).reshape(f.n)
    if np.any(mu <= 0):
        raise PreconditionViolation("mu_positive", "nu needs a density with respect to mu on every node")
    ops, verts = element_gradient(f.n, f.h)
    w = element_weights(mu, verts)
    if c is None:
        c = dual_sobolev_norm(DualNormProblem.on_grid(f, mu, nu, mu, spec)).value
    if slack is None:
        slack = 10.0 * (max(f.h) + 1.0 / slices)
    prof = spec.profile
    I = None
    times = np.linspace(0.0, 1.0, slices + 1)
    if c <= 0.0:
        q1 = _quiet(inf_convolve, f, spec, 1.0)
        I = float(np.sum(nu * q1.values) - np.sum(mu * f.values))
        return {"chain_values": {"I": I, "int_I_t": 0.0, "bound": 0.0}, "c": 0.0, "slack": slack,
                "margin": -I, "pass": bool(I <= slack)}
    if theta_sol is None or abs(theta_sol.c - c) > 1e-12 * c:
        theta_sol = bvp.solve_theta(c, prof)
    th = np.atleast_1d(theta_sol.theta(times))
    thp = np.atleast_1d(theta_sol.theta_prime(times))
    It = np.empty(times.size)
    lux = np.empty(times.size)
    for k, t in enumerate(times):
        q = f if t == 0.0 else _quiet(inf_convolve, f, spec, float(t))
        lux[k], integ = _grad_norms(q.values, ops, w, spec)
        It[k] = c * thp[k] * lux[k] - (1.0 - th[k]) * integ
        if k == times.size - 1:
            I = float(np.sum(nu * q.values) - np.sum(mu * f.values))
    int_It = float(np.sum(0.5 * (It[1:] + It[:-1]) * np.diff(times)))
    bound = bvp.interpolation_constant(theta_sol)
    per_slice_bound = theta_sol.integrand(times)
    margin = bound - I
    return {"chain_values": {"I": I, "int_I_t": int_It, "bound": bound}, "c": float(c), "delta": theta_sol.delta,
            "I_t": It.tolist(), "slice_bound": np.atleast_1d(per_slice_bound).tolist(),
            "slack": float(slack), "margin": float(margin), "pass": bool(I <= bound + slack)}


def random_lipschitz(rng, grid, lip=1.0, terms=6):
    """Bounded Lipschitz field: a random sum of sines scaled to Lipschitz constant about ``lip``."""
    pts = grid.points()
    vals = np.zeros(grid.n)
    for _ in range(terms):
        k = rng.normal(size=grid.dim) * 2.0
        vals += rng.uniform(-1, 1) * np.sin(pts @ k + rng.uniform(0, 2 * np.pi))
    field_ = grid.with_values(vals)
    L = field_.lipschitz
    if L > 0:
        vals = vals * (lip / L)
    return grid.with_values(vals - vals.mean(), np.zeros(grid.n, dtype=bool))
