"""Command-line entry point ``kte``."""

import argparse
import json
import math
import sys
import warnings

import numpy as np

from . import bvp, harness
from .convex_cost import check_delta2, cost_from_dict
from .errors import KteError
from .grid import GridField
from .hopf_lax import inf_convolve
from .measures import DiscreteMeasure
from .orlicz import luxemburg_norm, orlicz_norm
from .sobolev_dual import DualNormProblem, dual_sobolev_norm
from .transport import monotone_certificate, solve_ot


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _load_cost(path):
    return cost_from_dict(_load_json(path))


def _emit(obj):
    print(json.dumps(harness._plain(obj), sort_keys=True))


def parse_seeds(text):
    """``"0..99"`` (inclusive), ``"3"`` or ``"1,4,9"``."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def _grid_from(obj):
    if isinstance(obj, str):
        return harness.parse_grid(obj)
    n = obj["n"]
    return GridField(obj["origin"], obj["h"], n, np.zeros(tuple(np.atleast_1d(n))))


# ---------------------------------------------------------------------------
# subcommands


def cmd_cost(args):
    spec = _load_cost(args.cost)
    prof = spec.profile
    out = {"cost": spec.to_dict(), "superlinear": spec.is_superlinear, "even": spec.is_even,
           "p_minus": prof.p_minus, "p_plus": prof.p_plus, "profile_exact": prof.exact,
           "gamma": prof.gamma, "A_thm12": prof.A_thm12, "A_thm13": prof.A_thm13}
    diag = check_delta2(spec)
    out["delta2"] = {"sup_ratio": diag.sup_ratio, "passes": diag.passes}
    if args.x:
        x = np.array([[float(v) for v in pt.split(",")] for pt in args.x])
        out["L"] = spec.L(x).tolist()
        out["L_conjugate"] = spec.conjugate.value(x).tolist()
    if args.r:
        r = np.array([float(v) for v in args.r.split(",")])
        out["phi"] = np.atleast_1d(prof.phi(r)).tolist()
        out["psi"] = np.atleast_1d(prof.psi(r)).tolist()
        out["R_L"] = np.atleast_1d(spec.radius(r)).tolist()
    _emit(out)
    return 0


def cmd_hopflax(args):
    spec = _load_cost(args.cost)
    f = GridField.from_csv(args.f)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        q = inf_convolve(f, spec, args.t, window=args.window)
    if args.out:
        q.to_csv(args.out)
    _emit({"t": args.t, "min": float(q.values.min()), "max": float(q.values.max()),
           "flagged_nodes": int(q.flags.sum()), "warnings": [str(w.message) for w in caught]})
    return 0


def cmd_norm(args):
    spec = _load_cost(args.cost)
    lam = DiscreteMeasure.load(args.measure)
    u = np.loadtxt(args.u, delimiter=",", ndmin=2)
    if u.shape[0] != len(lam) and u.shape[1] == len(lam):
        u = u.T
    out = {}
    if args.kind in ("luxemburg", "both"):
        out["luxemburg"] = luxemburg_norm(u, spec, lam)
    if args.kind in ("orlicz", "both"):
        out["orlicz"] = orlicz_norm(u, spec, lam)
    _emit(out)
    return 0


def cmd_dualnorm(args):
    prob_d = _load_json(args.problem)
    spec = cost_from_dict(prob_d["cost"]) if args.cost is None else _load_cost(args.cost)
    grid = _grid_from(prob_d["grid"])
    lam = prob_d.get("lam", prob_d["mu"])
    prob = DualNormProblem.on_grid(grid, prob_d["mu"], prob_d["nu"], lam, spec)
    res = dual_sobolev_norm(prob, method=args.method, restarts=args.restarts)
    if args.emit_witness:
        res.witness_f.to_csv(args.emit_witness)
    _emit({"value": res.value, "constraint": res.constraint, "method": res.method, "info": res.info})
    return 0


def cmd_ot(args):
    spec = _load_cost(args.cost)
    mu = DiscreteMeasure.load(args.mu)
    nu = DiscreteMeasure.load(args.nu)
    plan = solve_ot(mu, nu, spec)
    out = {"cost": plan.cost, "dual_value": plan.dual_value, "duality_gap": plan.duality_gap,
           "pivots": plan.pivots, "support": int(plan.mass.size)}
    if args.oracle == "1d":
        cert = monotone_certificate(mu, nu, spec)
        out["oracle_cost"] = cert["cost"]
        out["oracle_duality_gap"] = cert["duality_gap"]
        out["oracle_agrees"] = bool(abs(cert["cost"] - plan.cost) <= 1e-9 * (1.0 + abs(plan.cost)))
    if args.emit_plan:
        plan.to_csv(args.emit_plan)
    _emit(out)
    return 0


def cmd_bvp(args):
    spec = _load_cost(args.cost)
    prof = spec.profile
    sol = bvp.solve_theta(args.c, prof)
    if args.emit_theta:
        sol.to_csv(args.emit_theta)
    _emit({"c": sol.c, "delta": sol.delta, "R_one": sol.R_one, "residual_sup": sol.residual_sup,
           "interpolation_constant": bvp.interpolation_constant(sol),
           "A_thm12_phi_c": prof.A_thm12 * float(prof.phi(args.c)),
           "bound_holds": bool(sol.delta <= prof.A_thm12 * float(prof.phi(args.c)) + 1e-6)})
    return 0


def cmd_verify(args):
    spec = _load_cost(args.cost)
    grid = harness.parse_grid(args.grid)
    theorem = "T" + args.theorem.lstrip("Tt")
    kinds = tuple(args.kinds.split(","))
    reports = harness.run_cases(spec, theorem, grid, parse_seeds(args.seeds), kinds=kinds,
                                slack=args.slack, crosscheck=args.crosscheck)
    if args.out:
        harness.write_reports(reports, args.out)
    else:
        for r in reports:
            print(r.to_json())
    failed = [r.case_id for r in reports if not r.passed]
    print(json.dumps({"cases": len(reports), "failed": failed,
                      "min_margin": min((r.margin for r in reports), default=math.nan)}), file=sys.stderr)
    return 0 if not failed else 1


def build_parser():
    p = argparse.ArgumentParser(prog="kte", description="Transport-entropy toolkit: costs, Hopf-Lax, norms, OT, checks.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("cost", help="profile constants and values of a cost")
    s.add_argument("--cost", required=True)
    s.add_argument("--x", nargs="*", help="points as comma-separated coordinates")
    s.add_argument("--r", help="comma-separated radii for Phi, Psi and R_L")
    s.set_defaults(func=cmd_cost)

    s = sub.add_parser("hopflax", help="infimum-convolution of a grid field")
    s.add_argument("--cost", required=True)
    s.add_argument("--f", required=True, help="grid CSV")
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--window", choices=["auto", "full"], default="auto")
    s.add_argument("--out")
    s.set_defaults(func=cmd_hopflax)

    s = sub.add_parser("norm", help="Luxemburg / Orlicz norm of a sample")
    s.add_argument("--cost", required=True)
    s.add_argument("--measure", required=True)
    s.add_argument("--u", required=True, help="CSV with one row per atom")
    s.add_argument("--kind", choices=["luxemburg", "orlicz", "both"], default="both")
    s.set_defaults(func=cmd_norm)

    s = sub.add_parser("dualnorm", help="dual Sobolev norm of nu - mu")
    s.add_argument("--problem", required=True)
    s.add_argument("--cost")
    s.add_argument("--method", choices=["auto", "exact1d", "ascent"], default="auto")
    s.add_argument("--restarts", type=int, default=2)
    s.add_argument("--emit-witness")
    s.set_defaults(func=cmd_dualnorm)

    s = sub.add_parser("ot", help="exact optimal transport")
    s.add_argument("--mu", required=True)
    s.add_argument("--nu", required=True)
    s.add_argument("--cost", required=True)
    s.add_argument("--oracle", choices=["1d"])
    s.add_argument("--emit-plan")
    s.set_defaults(func=cmd_ot)

    s = sub.add_parser("bvp", help="solve for delta and theta")
    s.add_argument("--cost", required=True)
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--emit-theta")
    s.set_defaults(func=cmd_bvp)

    s = sub.add_parser("verify", help="energy-bound verification over seeded cases")
    s.add_argument("--theorem", required=True, choices=["11", "12", "13", "T11", "T12", "T13"])
    s.add_argument("--cost", required=True)
    s.add_argument("--seeds", default="0..9")
    s.add_argument("--grid", default="N=256,range=[-2,2]")
    s.add_argument("--kinds", default="bumps,mixture,pwconst")
    s.add_argument("--slack", type=float, default=0.0)
    s.add_argument("--crosscheck", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KteError as exc:
        print(f"kte: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
