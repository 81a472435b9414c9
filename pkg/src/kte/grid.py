"""Uniform axis-aligned grids in one or two dimensions and fields sampled on them."""

import csv
import io

import numpy as np

from .errors import InvalidSpec


class GridField:
    """Scalar or vector field on a uniform grid.

    Parameters
    ----------
    origin, h, n : sequences of length ``dim``
        Coordinate of the first node, spacing and node count per axis.
    values : ndarray
        Shape ``n`` for a scalar field or ``n + (k,)`` for a vector field.
    flags : ndarray of bool, optional
        Nodes whose value is unreliable (e.g. a Hopf-Lax window was clipped
        by the domain boundary). Invariant checks skip them.
    """

    def __init__(self, origin, h, n, values, flags=None):
        self.origin = tuple(float(o) for o in np.atleast_1d(origin))
        self.h = tuple(float(v) for v in np.atleast_1d(h))
        self.n = tuple(int(v) for v in np.atleast_1d(n))
        self.dim = len(self.n)
        if self.dim not in (1, 2) or len(self.origin) != self.dim or len(self.h) != self.dim:
            raise InvalidSpec("grids must be 1D or 2D with one origin/spacing/count per axis")
        if any(v <= 0 for v in self.h):
            raise InvalidSpec("grid spacing must be positive")
        if any(v < 2 for v in self.n):
            raise InvalidSpec("each axis needs at least 2 nodes")
        values = np.asarray(values, dtype=float)
        if values.shape[: self.dim] != self.n or values.ndim > self.dim + 1:
            raise InvalidSpec(f"values shape {values.shape} does not match grid {self.n}")
        if not np.all(np.isfinite(values)):
            raise InvalidSpec("grid values must be finite")
        self.values = values
        self.flags = np.zeros(self.n, dtype=bool) if flags is None else np.asarray(flags, dtype=bool)

    # construction helpers -------------------------------------------------

    @classmethod
    def from_function(cls, fun, origin, h, n):
        """Sample ``fun(points) -> values`` at every node (points shape ``(..., dim)``)."""
        tmp = cls(origin, h, n, np.zeros(tuple(np.atleast_1d(n))))
        return cls(origin, h, n, fun(tmp.points()))

    @classmethod
    def on_interval(cls, lo, hi, n, values=None):
        """1D grid with ``n`` nodes spanning ``[lo, hi]``."""
        h = (hi - lo) / (n - 1)
        vals = np.zeros(n) if values is None else values
        return cls([lo], [h], [n], vals)

    def with_values(self, values, flags=None):
        return GridField(self.origin, self.h, self.n, values, self.flags if flags is None else flags)

    # geometry -------------------------------------------------------------

    def axes(self):
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.h, self.n)]

    def points(self):
        """Node coordinates with shape ``n + (dim,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def flat_points(self):
        return self.points().reshape(-1, self.dim)

    @property
    def size(self):
        return int(np.prod(self.n))

    @property
    def is_vector(self):
        return self.values.ndim == self.dim + 1

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    # cached statistics ----------------------------------------------------

    @property
    def M(self):
        return float(np.max(np.abs(self.values)))

    @property
    def m(self):
        return float(np.min(self.values))

    @property
    def lipschitz(self):
        """Largest adjacent difference divided by the spacing, over all axes."""
        best = 0.0
        for ax in range(self.dim):
            d = np.abs(np.diff(self.values, axis=ax)) / self.h[ax]
            if self.is_vector:
                d = np.linalg.norm(d, axis=-1)
            if d.size:
                best = max(best, float(d.max()))
        return best

    def gradient(self):
        """Central-difference gradient (one-sided at the boundary) as a vector field."""
        if self.is_vector:
            raise ValueError("gradient of a vector field is not supported")
        if self.dim == 1:
            g = np.gradient(self.values, self.h[0])[..., None]
        else:
            g = np.stack(np.gradient(self.values, *self.h), axis=-1)
        return GridField(self.origin, self.h, self.n, g, self.flags)

    def interior_mask(self, margin=1):
        mask = np.zeros(self.n, dtype=bool)
        mask[tuple(slice(margin, k - margin) for k in self.n)] = True
        return mask

    def interpolate(self, x):
        """Multilinear interpolation at points ``x`` (shape ``(..., dim)``), clamped to the grid."""
        from scipy.interpolate import RegularGridInterpolator

        x = np.asarray(x, dtype=float)
        lo = np.array([a[0] for a in self.axes()])
        hi = np.array([a[-1] for a in self.axes()])
        xc = np.clip(x, lo, hi)
        interp = RegularGridInterpolator(self.axes(), self.values)
        return interp(xc.reshape(-1, self.dim)).reshape(x.shape[:-1] + self.values.shape[self.dim:])

    # CSV ------------------------------------------------------------------

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = []
        for ax in range(self.dim):
            header += [f"axis{ax}_origin", f"axis{ax}_h", f"axis{ax}_n"]
        w.writerow(header)
        row = []
        for ax in range(self.dim):
            row += [repr(self.origin[ax]), repr(self.h[ax]), str(self.n[ax])]
        w.writerow(row)
        flat = self.values.reshape(self.size, -1)
        for v in flat:
            w.writerow([repr(float(x)) for x in v])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source):
        """Read a grid written by :meth:`to_csv` (path or text)."""
        if "\n" in str(source):
            text = str(source)
        else:
            with open(source) as fh:
                text = fh.read()
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        header, meta, body = rows[0], rows[1], rows[2:]
        dim = len(header) // 3
        origin = [float(meta[3 * a]) for a in range(dim)]
        h = [float(meta[3 * a + 1]) for a in range(dim)]
        n = [int(meta[3 * a + 2]) for a in range(dim)]
        vals = np.array([[float(x) for x in r] for r in body])
        if vals.shape[1] == 1:
            vals = vals.reshape(n)
        else:
            vals = vals.reshape(tuple(n) + (vals.shape[1],))
        return cls(origin, h, n, vals)

    def __repr__(self):
        kind = "vector" if self.is_vector else "scalar"
        return f"GridField(dim={self.dim}, n={self.n}, h={self.h}, {kind})"


def gaussian_smooth(weights, h, eps):
    """Convolve node weights with a Gaussian of standard deviation ``eps``.

    The kernel is truncated at 6 eps and the total mass is restored afterwards.
    Below a tenth of the grid spacing the kernel collapses to the identity.
    """
    from scipy.ndimage import gaussian_filter

    w = np.asarray(weights, dtype=float)
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps < float(np.min(h)) / 10.0:
        return w.copy()
    sigma = [eps / hh for hh in h]
    out = gaussian_filter(w, sigma=sigma, truncate=6.0, mode="reflect")
    return out * (w.sum() / out.sum())
