"""Compare the compiled and pure-numpy hot kernels.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is timed on both
paths after a warm-up call (which also triggers compilation), and the outputs
are checked for exact agreement.
"""

import argparse
import time

import numpy as np

from kte import _kernels
from kte.convex_cost import PowerCost
from kte.grid import GridField
from kte.hopf_lax import _stencil


def best_of(fun, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fun()
        times.append(time.perf_counter() - t0)
    return min(times), out


def minplus_case(n, dim, radius, rng):
    shape = (n,) * dim
    f = GridField([0.0] * dim, [1.0 / (n - 1)] * dim, list(shape), rng.standard_normal(shape))
    off, _ = _stencil(f, radius)
    kv = PowerCost(2, dim=dim).L(off * np.asarray(f.h)[None, :])
    return f.values, off, kv


def run(repeat=5, seed=0):
    if not _kernels.USE_NUMBA:
        print("numba disabled via KTE_DISABLE_NUMBA; compiled path unavailable")
        return []
    rng = np.random.default_rng(seed)
    rows = []
    cases = [("minplus 1D n=4096 r=0.1", lambda: minplus_case(4096, 1, 0.1, rng), "minplus"),
             ("minplus 1D n=4096 r=0.5", lambda: minplus_case(4096, 1, 0.5, rng), "minplus"),
             ("minplus 2D n=64^2 r=0.25", lambda: minplus_case(64, 2, 0.25, rng), "minplus"),
             ("minplus 2D n=128^2 r=0.1", lambda: minplus_case(128, 2, 0.1, rng), "minplus")]
    for m in (200, 800):
        def mk(m=m):
            C = rng.random((m, m))
            return C, rng.random(m), rng.random(m)
        cases.append((f"price dantzig {m}x{m}", mk, "dantzig"))
        cases.append((f"price bland {m}x{m}", mk, "bland"))
    for name, make, kind in cases:
        args = make()
        if kind == "minplus":
            call = lambda jit: _kernels.minplus(*args, use_numba=jit)
        else:
            call = lambda jit, kind=kind: _kernels.price(*args, rule=kind, tol=0.5, use_numba=jit)
        call(True)
        t_jit, out_jit = best_of(lambda: call(True), repeat)
        t_np, out_np = best_of(lambda: call(False), repeat)
        same = all(np.array_equal(np.asarray(a), np.asarray(b)) for a, b in zip(out_jit, out_np))
        rows.append((name, t_jit, t_np, same))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rows = run(args.repeat)
    print(f"{'kernel':28s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}  identical")
    for name, tj, tn, same in rows:
        print(f"{name:28s} {1e3 * tj:11.3f} {1e3 * tn:11.3f} {tn / tj:8.1f}  {same}")


if __name__ == "__main__":
    main()
