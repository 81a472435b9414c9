"""Finitely supported probability measures and functions on their supports."""

import json

import numpy as np

from .errors import InvalidSpec


class DiscreteMeasure:
    """Probability measure with finitely many atoms.

    Parameters
    ----------
    points : array_like, shape (k, dim) or (k,) for dim 1
    weights : array_like, shape (k,)
        Strictly positive, summing to 1 within 1e-12.
    """

    def __init__(self, points, weights, check_distinct=True):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(weights, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] != w.size or w.size == 0:
            raise InvalidSpec("points and weights must align and be nonempty")
        if np.any(~np.isfinite(pts)) or np.any(~np.isfinite(w)):
            raise InvalidSpec("measure entries must be finite")
        if np.any(w <= 0):
            raise InvalidSpec("weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidSpec(f"weights sum to {w.sum():.15g}, not 1")
        if check_distinct and w.size > 1:
            order = np.lexsort(pts.T[::-1])
            s = pts[order]
            if np.any(np.all(s[1:] == s[:-1], axis=1)):
                raise InvalidSpec("support points must be distinct")
        self.points = pts
        self.weights = w

    @classmethod
    def normalized(cls, points, weights):
        w = np.asarray(weights, dtype=float)
        return cls(points, w / w.sum())

    @classmethod
    def dirac(cls, point):
        return cls(np.atleast_2d(np.asarray(point, dtype=float).reshape(1, -1)), [1.0])

    @classmethod
    def on_grid(cls, grid, weights):
        """Measure on the nodes of a :class:`~kte.grid.GridField` (row-major weights)."""
        return cls(grid.flat_points(), np.asarray(weights, dtype=float).ravel())

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.weights.size

    def shifted(self, y):
        return DiscreteMeasure(self.points + np.asarray(y, dtype=float), self.weights)

    def to_dict(self):
        return {"dim": self.dim, "points": self.points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d):
        pts = np.asarray(d["points"], dtype=float).reshape(len(d["weights"]), d.get("dim", 1))
        return cls(pts, d["weights"])

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def __repr__(self):
        return f"DiscreteMeasure(k={len(self)}, dim={self.dim})"


def convolve_measures(lam, kap):
    """The measure ``lam * kap`` with coincident atoms merged."""
    pts = (lam.points[:, None, :] + kap.points[None, :, :]).reshape(-1, lam.dim)
    w = (lam.weights[:, None] * kap.weights[None, :]).ravel()
    uniq, inv = np.unique(np.round(pts, 12), axis=0, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv.ravel(), w)
    return DiscreteMeasure(uniq, merged / merged.sum())


class VectorSample:
    """Values ``u(omega_i)`` aligned with the atoms of a measure."""

    def __init__(self, values, dim=None):
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if dim is not None and v.shape[1] != dim:
            raise InvalidSpec(f"expected {dim}-vectors, got shape {v.shape}")
        if np.any(~np.isfinite(v)):
            raise InvalidSpec("sample values must be finite")
        self.values = v

    def __len__(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]

    def __mul__(self, a):
        return VectorSample(self.values * a)

    __rmul__ = __mul__

    def __add__(self, other):
        return VectorSample(self.values + other.values)

    def __neg__(self):
        return VectorSample(-self.values)
