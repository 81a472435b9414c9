"""Hot loops with a jitted and a vectorized-numpy implementation.

The two paths perform the same floating-point operations in the same order
per output entry, so they agree bit for bit. ``USE_NUMBA`` from
:mod:`kte._accel` picks the default; both are importable for benchmarking.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# min-plus convolution with a precomputed stencil
#
# out[i] = min_s f[i - off[s]] + kv[s] over in-range sources. The stencil is
# sorted so that the source index increases with s; a strict "<" then keeps
# the smallest source index on ties.


@njit
def _minplus_1d_jit(f, off, kv, out, arg):
    n = f.shape[0]
    for i in range(n):
        best = np.inf
        bj = -1
        for s in range(off.shape[0]):
            j = i - off[s]
            if j < 0 or j >= n:
                continue
            v = f[j] + kv[s]
            if v < best:
                best = v
                bj = j
        out[i] = best
        arg[i] = bj


@njit
def _minplus_2d_jit(f, off0, off1, kv, out, arg):
    n0, n1 = f.shape
    for i0 in range(n0):
        for i1 in range(n1):
            best = np.inf
            bj = -1
            for s in range(kv.shape[0]):
                j0 = i0 - off0[s]
                j1 = i1 - off1[s]
                if j0 < 0 or j0 >= n0 or j1 < 0 or j1 >= n1:
                    continue
                v = f[j0, j1] + kv[s]
                if v < best:
                    best = v
                    bj = j0 * n1 + j1
            out[i0, i1] = best
            arg[i0, i1] = bj


def _minplus_1d_np(f, off, kv, out, arg):
    n = f.shape[0]
    out[:] = np.inf
    arg[:] = -1
    idx = np.arange(n)
    for s in range(off.shape[0]):
        k = int(off[s])
        lo, hi = max(0, k), min(n, n + k)  # targets i with 0 <= i - k < n
        if lo >= hi:
            continue
        cand = f[lo - k:hi - k] + kv[s]
        tgt = out[lo:hi]
        better = cand < tgt
        tgt[better] = cand[better]
        arg[lo:hi][better] = idx[lo - k:hi - k][better]


def _minplus_2d_np(f, off0, off1, kv, out, arg):
    n0, n1 = f.shape
    out[:] = np.inf
    arg[:] = -1
    flat = np.arange(n0 * n1).reshape(n0, n1)
    for s in range(kv.shape[0]):
        k0, k1 = int(off0[s]), int(off1[s])
        lo0, hi0 = max(0, k0), min(n0, n0 + k0)
        lo1, hi1 = max(0, k1), min(n1, n1 + k1)
        if lo0 >= hi0 or lo1 >= hi1:
            continue
        cand = f[lo0 - k0:hi0 - k0, lo1 - k1:hi1 - k1] + kv[s]
        tgt = out[lo0:hi0, lo1:hi1]
        better = cand < tgt
        tgt[better] = cand[better]
        arg[lo0:hi0, lo1:hi1][better] = flat[lo0 - k0:hi0 - k0, lo1 - k1:hi1 - k1][better]


def minplus(f, offsets, kv, use_numba=None):
    """Min-plus convolution of ``f`` (1D or 2D) with a sorted stencil.

    Returns ``(values, argmin_flat_index)``.
    """
    jit = USE_NUMBA if use_numba is None else use_numba
    f = np.ascontiguousarray(f, dtype=float)
    kv = np.ascontiguousarray(kv, dtype=float)
    out = np.empty_like(f)
    arg = np.empty(f.shape, dtype=np.int64)
    if f.ndim == 1:
        off = np.ascontiguousarray(offsets[:, 0], dtype=np.int64)
        (_minplus_1d_jit if jit else _minplus_1d_np)(f, off, kv, out, arg)
    else:
        off0 = np.ascontiguousarray(offsets[:, 0], dtype=np.int64)
        off1 = np.ascontiguousarray(offsets[:, 1], dtype=np.int64)
        (_minplus_2d_jit if jit else _minplus_2d_np)(f, off0, off1, kv, out, arg)
    return out, arg


# ---------------------------------------------------------------------------
# transportation-simplex pricing: reduced cost C[i, j] - u[i] - v[j]


@njit
def _price_dantzig_jit(C, u, v):
    m, k = C.shape
    best = 0.0
    bi = -1
    bj = -1
    for i in range(m):
        for j in range(k):
            r = C[i, j] - u[i] - v[j]
            if r < best:
                best = r
                bi = i
                bj = j
    return bi, bj, best


@njit
def _price_bland_jit(C, u, v, tol):
    m, k = C.shape
    for i in range(m):
        for j in range(k):
            r = C[i, j] - u[i] - v[j]
            if r < -tol:
                return i, j, r
    return -1, -1, 0.0


def _price_dantzig_np(C, u, v):
    R = C - u[:, None] - v[None, :]
    flat = int(np.argmin(R))
    i, j = divmod(flat, C.shape[1])
    best = float(R[i, j])
    if best < 0.0:
        return i, j, best
    return -1, -1, 0.0


def _price_bland_np(C, u, v, tol):
    R = C - u[:, None] - v[None, :]
    hits = np.flatnonzero(R < -tol)
    if hits.size == 0:
        return -1, -1, 0.0
    i, j = divmod(int(hits[0]), C.shape[1])
    return i, j, float(R[i, j])


def price(C, u, v, rule="dantzig", tol=0.0, use_numba=None):
    """Entering arc for the transportation simplex.

    ``dantzig`` returns the most negative reduced cost (first in row-major
    order on ties); ``bland`` returns the first arc below ``-tol``.
    Returns ``(i, j, reduced_cost)`` with ``i = -1`` when none qualifies.
    """
    jit = USE_NUMBA if use_numba is None else use_numba
    if rule == "dantzig":
        i, j, r = (_price_dantzig_jit if jit else _price_dantzig_np)(C, u, v)
    else:
        i, j, r = (_price_bland_jit if jit else _price_bland_np)(C, u, v, tol)
    return int(i), int(j), float(r)
