"""Discrete planar Radon measures: weighted point clouds with ball queries.

A measure is a finite weighted point set.  Every integral downstream becomes
an exact finite weighted sum, so no quadrature error enters beyond the
discretization pitch ``h`` of the input cloud itself.  All mass reductions go
through :func:`stable_sum`, which returns the exactly rounded floating-point
sum; results are therefore independent of summation order and thread count.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegeneratePairError,
    MeasureFormatError,
    ScaleOutOfRangeError,
)

__all__ = [
    "Line",
    "DiscreteMeasure",
    "RegularityReport",
    "stable_sum",
    "stable_vec_sum",
    "ball_mass",
    "ahlfors_report",
    "density_profile",
    "rescale",
    "restrict",
    "load_csv",
    "save_csv",
]

# Slack applied to KD-tree radii so the strict `dist < r` predicate below is
# evaluated on a superset of candidates regardless of internal rounding.
_TREE_SLACK = 1e-9


def stable_sum(values) -> float:
    """Exactly rounded sum of a 1-D array (order-independent)."""
    return math.fsum(np.asarray(values, dtype=float).ravel())


def stable_vec_sum(vectors) -> np.ndarray:
    """Componentwise exactly rounded sum of an (n, 2) array."""
    v = np.asarray(vectors, dtype=float)
    if v.size == 0:
        return np.zeros(2)
    return np.array([math.fsum(v[:, 0]), math.fsum(v[:, 1])])


@dataclass(frozen=True)
class Line:
    """Affine line in canonical form.

    ``theta`` is the direction angle in [0, pi); ``offset`` is the signed
    distance of the line from the origin along the unit normal
    ``(-sin theta, cos theta)``.  The anchor (foot of the perpendicular from
    the origin) is ``offset * normal``.
    """

    theta: float
    offset: float

    def __post_init__(self):
        raw = float(self.theta)
        th = raw % math.pi
        if th >= math.pi:  # guard: `% pi` may round up to pi
            th -= math.pi
        wraps = round((raw - th) / math.pi)
        off = float(self.offset)
        if wraps % 2:  # normal flips each time theta wraps by pi
            off = -off
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "offset", off)

    @classmethod
    def from_point_angle(cls, point, theta: float) -> "Line":
        th = float(theta) % math.pi
        if th >= math.pi:
            th = 0.0
        n = np.array([-math.sin(th), math.cos(th)])
        p = np.asarray(point, dtype=float)
        return cls(th, float(p @ n))

    @classmethod
    def from_points(cls, p0, p1) -> "Line":
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        d = p1 - p0
        if np.hypot(d[0], d[1]) == 0.0:
            raise DegeneratePairError("coincident points do not span a line")
        return cls.from_point_angle(p0, math.atan2(d[1], d[0]))

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def normal(self) -> np.ndarray:
        return np.array([-math.sin(self.theta), math.cos(self.theta)])

    @property
    def anchor(self) -> np.ndarray:
        return self.offset * self.normal

    def distance(self, points) -> np.ndarray:
        """Unsigned distance from points (n, 2) or a single point."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.abs(p @ self.normal - self.offset)
        return d if np.asarray(points).ndim == 2 else float(d[0])

    def project(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        s = p @ self.normal - self.offset
        out = p - s[:, None] * self.normal
        return out if np.asarray(points).ndim == 2 else out[0]


@dataclass(frozen=True)
class RegularityReport:
    """Observed Ahlfors-regularity constants over sampled centers and scales.

    ``c0_upper`` bounds sup mass(B(x,r))/r, ``c0_lower`` bounds
    sup r/mass(B(x,r)); both are clamped below by 1 so the combined constant
    ``c0`` is directly comparable with the usual normalization.
    """

    c0_upper: float
    c0_lower: float
    r_min: float
    r_max: float
    n_centers: int
    n_scales: int

    @property
    def c0(self) -> float:
        return max(self.c0_upper, self.c0_lower)


class DiscreteMeasure:
    """Weighted planar point cloud with an index for range queries.

    Parameters
    ----------
    points : (n, 2) array
        Support points; must be finite.
    weights : (n,) array
        Strictly positive finite masses.
    h : float, optional
        Discretization pitch of the cloud, carried so callers can form
        O(h/r)-style tolerances.
    """

    def __init__(self, points, weights, h: float | None = None):
        pts = np.ascontiguousarray(points, dtype=float)
        w = np.ascontiguousarray(weights, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (n, 2)")
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must have shape (n,)")
        if pts.shape[0] == 0:
            raise ValueError("measure needs at least one support point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("weights must be positive and finite")
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w
        self.h = None if h is None else float(h)
        self._tree = cKDTree(pts)
        self._diam = None

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return stable_sum(self.weights)

    @property
    def diam(self) -> float:
        """Diameter of the support (hull-based, cached)."""
        if self._diam is None:
            self._diam = _point_set_diameter(self.points)
        return self._diam

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def ball_indices(self, x, r: float) -> np.ndarray:
        """Sorted indices of support points with |p - x| < r (open ball)."""
        if r <= 0.0:
            raise ValueError(f"ball radius must be positive, got {r}")
        x = np.asarray(x, dtype=float)
        cand = self._tree.query_ball_point(x, r * (1.0 + _TREE_SLACK))
        cand = np.sort(np.asarray(cand, dtype=np.intp))
        if cand.size == 0:
            return cand
        d = self.points[cand] - x
        keep = np.hypot(d[:, 0], d[:, 1]) < r
        return cand[keep]

    def interior_indices(self, margin: float) -> np.ndarray:
        """Indices at distance >= margin from the bounding box boundary."""
        if margin <= 0.0:
            return np.arange(len(self), dtype=np.intp)
        lo, hi = self.bbox
        p = self.points
        ok = np.ones(len(self), dtype=bool)
        for ax in range(2):
            if hi[ax] - lo[ax] > 0:
                ok &= (p[:, ax] - lo[ax] >= margin) & (hi[ax] - p[:, ax] >= margin)
        return np.nonzero(ok)[0].astype(np.intp)


def _point_set_diameter(pts: np.ndarray) -> float:
    n = pts.shape[0]
    if n == 1:
        return 0.0
    if n > 16:
        try:
            from scipy.spatial import ConvexHull, QhullError

            hull = pts[ConvexHull(pts).vertices]
        except QhullError:
            # collinear cloud: extremes along both axes suffice
            idx = [pts[:, 0].argmin(), pts[:, 0].argmax(),
                   pts[:, 1].argmin(), pts[:, 1].argmax()]
            hull = pts[sorted(set(idx))]
    else:
        hull = pts
    d = hull[:, None, :] - hull[None, :, :]
    return float(np.hypot(d[..., 0], d[..., 1]).max())


def ball_mass(mu: DiscreteMeasure, x, r: float) -> float:
    """Mass of the open ball B(x, r)."""
    idx = mu.ball_indices(x, r)
    return stable_sum(mu.weights[idx])


def density_profile(mu: DiscreteMeasure, x, scales) -> list[float]:
    """Density ratios mass(B(x,r))/r along a decreasing list of scales."""
    scales = [float(s) for s in scales]
    if not scales:
        raise ValueError("scale list must be non-empty")
    if any(s <= 0 for s in scales):
        raise ValueError("scales must be positive")
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly decreasing")
    return [ball_mass(mu, x, r) / r for r in scales]


def ahlfors_report(
    mu: DiscreteMeasure,
    r_min: float,
    r_max: float,
    n_centers: int,
    n_scales: int,
    seed: int = 0,
) -> RegularityReport:
    """Estimate the Ahlfors-regularity constant over sampled centers/scales.

    Centers are a seeded permutation prefix of the support, so enlarging
    ``n_centers`` with the same seed only adds centers (reported constants
    never decrease).
    """
    if r_min <= 0 or r_min >= r_max:
        raise ValueError("need 0 < r_min < r_max")
    if mu.diam == 0.0 or r_max > mu.diam:
        raise ValueError("r_max must not exceed the support diameter")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(mu))
    centers = order[: min(n_centers, len(mu))]
    scales = np.geomspace(r_min, r_max, n_scales)
    up = 1.0
    low = 1.0
    for ci in centers:
        x = mu.points[ci]
        for r in scales:
            m = ball_mass(mu, x, float(r))
            if m == 0.0:
                low = math.inf
                continue
            up = max(up, m / r)
            low = max(low, r / m)
    return RegularityReport(up, low, r_min, r_max, len(centers), n_scales)


def rescale(mu: DiscreteMeasure, x, r: float) -> DiscreteMeasure:
    """Blow-up candidate: p -> (p - x)/r with weights w/r."""
    if r <= 0:
        raise ValueError(f"rescale factor must be positive, got {r}")
    x = np.asarray(x, dtype=float)
    return DiscreteMeasure(
        (mu.points - x) / r,
        mu.weights / r,
        h=None if mu.h is None else mu.h / r,
    )


def restrict(mu: DiscreteMeasure, x, r: float) -> DiscreteMeasure:
    """Submeasure supported on the open ball B(x, r)."""
    idx = mu.ball_indices(x, r)
    if idx.size == 0:
        raise ScaleOutOfRangeError("restriction ball contains no support points")
    return DiscreteMeasure(mu.points[idx], mu.weights[idx], h=mu.h)


def save_csv(mu: DiscreteMeasure, path, invocation: str | None = None) -> None:
    """Write the measure as `x,y,w` CSV (repr round-trips every float)."""
    with open(path, "w", encoding="utf-8") as f:
        if invocation:
            f.write(f"# {invocation}\n")
        f.write("x,y,w\n")
        for (x, y), w in zip(mu.points, mu.weights):
            f.write(f"{x!r},{y!r},{w!r}\n")


def load_csv(path, h: float | None = None) -> DiscreteMeasure:
    """Load a measure from `x,y,w` CSV, rejecting bad rows with line numbers."""
    xs: list[float] = []
    ys: list[float] = []
    ws: list[float] = []
    with open(path, "r", encoding="utf-8") as f:
        header_seen = False
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if [c.strip().lower() for c in line.split(",")] != ["x", "y", "w"]:
                    raise MeasureFormatError(
                        f"{path}:{lineno}: expected header 'x,y,w', got {line!r}"
                    )
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise MeasureFormatError(f"{path}:{lineno}: expected 3 fields")
            try:
                x, y, w = (float(p) for p in parts)
            except ValueError as exc:
                raise MeasureFormatError(f"{path}:{lineno}: {exc}") from None
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(w)):
                raise MeasureFormatError(f"{path}:{lineno}: non-finite value")
            if w <= 0:
                raise MeasureFormatError(f"{path}:{lineno}: weight must be positive")
            xs.append(x)
            ys.append(y)
            ws.append(w)
    if not header_seen:
        raise MeasureFormatError(f"{path}: missing 'x,y,w' header")
    if not xs:
        raise MeasureFormatError(f"{path}: no data rows")
    return DiscreteMeasure(np.column_stack([xs, ys]), np.array(ws), h=h)
