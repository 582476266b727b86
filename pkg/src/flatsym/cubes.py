"""Dyadic-style cube lattices on the support of a discrete measure.

Construction is a greedy hierarchical net: nets are nested across levels and
scanned in a fixed order (descending weight, then lexicographic coordinates),
so identical input yields an identical lattice.  Membership is assigned at
the finest level by nearest net point (ties to the lower net index); coarser
cubes are unions of their children, which makes the partition and nesting
properties hold by construction.  Degenerate boundary slivers (diameter below
0.6 of the level's side) are merged into the same-level cube with the nearest
center, so every surviving cube supports a well-separated balanced pair.
Diameter and mass constants are measured, not assumed.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateCubeError,
    DegeneratePairError,
    NoGoodPointsError,
    ResolutionExhaustedError,
)
from .measure import DiscreteMeasure, Line, stable_sum, _point_set_diameter

__all__ = [
    "Cube",
    "CubeLattice",
    "build_lattice",
    "balanced_points",
    "good_balanced_points",
    "balanced_line",
]

_MERGE_FRACTION = 0.6      # cubes with diam < fraction * side get absorbed
_SEPARATION_FACTOR = 0.9   # net separation as a fraction of the cube side


@dataclass
class Cube:
    """One cube: a subset of support points with a designated center point."""

    level: int
    index: int
    center_idx: int          # index into the measure's point array
    members: np.ndarray      # sorted member indices
    center: np.ndarray
    side: float
    mass: float
    diam: float
    parent: tuple[int, int] | None = None
    children: list[tuple[int, int]] = field(default_factory=list)

    @property
    def id(self) -> str:
        return f"L{self.level}.{self.index}"


class CubeLattice:
    """Levels of cubes partitioning the support, finest to coarsest nested."""

    def __init__(self, mu: DiscreteMeasure, j_min: int, j_max: int, scale: float,
                 levels: dict[int, list[Cube]]):
        self.mu = mu
        self.j_min = j_min
        self.j_max = j_max
        self.scale = scale
        self.levels = levels
        self._beta_cache: dict[tuple[int, int], object] = {}

    def side(self, j: int) -> float:
        return self.scale * 2.0 ** (-j)

    def cube(self, key: tuple[int, int]) -> Cube:
        return self.levels[key[0]][key[1]]

    def all_cubes(self):
        for j in range(self.j_min, self.j_max + 1):
            yield from self.levels[j]

    def descendants(self, top: Cube, include_self: bool = True):
        """Cubes below `top`, in (level, index) order."""
        stack = [(top.level, top.index)]
        out = []
        while stack:
            key = stack.pop()
            q = self.cube(key)
            out.append(q)
            stack.extend(reversed(q.children))
        out.sort(key=lambda q: (q.level, q.index))
        if not include_self:
            out = [q for q in out if not (q.level == top.level and q.index == top.index)]
        return out

    def ancestors(self, q: Cube):
        """Chain from q's parent up to the top level."""
        out = []
        key = q.parent
        while key is not None:
            p = self.cube(key)
            out.append(p)
            key = p.parent
        return out

    @property
    def measured_c0(self) -> float:
        """Max of diam/side, mass/side and side/mass over all cubes."""
        worst = 1.0
        for q in self.all_cubes():
            worst = max(worst, q.diam / q.side)
            ratio = q.mass / q.side
            worst = max(worst, ratio, 1.0 / ratio)
        return worst

    def boundary_mass_fraction(self, q: Cube, tau: float) -> float:
        """Measured mass fraction of q within tau*side of its complement."""
        pts = self.mu.points
        inside = np.zeros(len(self.mu), dtype=bool)
        inside[q.members] = True
        tree = self.mu._tree
        thin = 0.0
        rad = tau * q.side
        for i in q.members:
            for jn in tree.query_ball_point(pts[i], rad):
                if not inside[jn]:
                    thin += self.mu.weights[i]
                    break
        return thin / q.mass

    def to_json_tree(self) -> list[dict]:
        def node(q: Cube) -> dict:
            return {
                "level": q.level,
                "id": q.id,
                "center": [float(q.center[0]), float(q.center[1])],
                "side": q.side,
                "mass": q.mass,
                "children": [node(self.cube(k)) for k in q.children],
            }

        return [node(q) for q in self.levels[self.j_min]]

    def dump_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_tree(), f, indent=1)
            f.write("\n")


def _scan_order(mu: DiscreteMeasure) -> np.ndarray:
    keys = np.lexsort((np.arange(len(mu)), mu.points[:, 1], mu.points[:, 0],
                       -mu.weights))
    return keys.astype(np.intp)


def _greedy_net(points: np.ndarray, order: np.ndarray, sep: float,
                seed_net: list[int]) -> list[int]:
    """Extend seed_net to a maximal sep-separated subset, scanning `order`."""
    cell = sep
    grid: dict[tuple[int, int], list[int]] = {}

    def cell_of(p):
        return (int(math.floor(p[0] / cell)), int(math.floor(p[1] / cell)))

    def far_from_net(p) -> bool:
        cx, cy = cell_of(p)
        for gx in range(cx - 1, cx + 2):
            for gy in range(cy - 1, cy + 2):
                for i in grid.get((gx, gy), ()):
                    if np.hypot(points[i, 0] - p[0], points[i, 1] - p[1]) < sep:
                        return False
        return True

    net = list(seed_net)
    for i in net:
        grid.setdefault(cell_of(points[i]), []).append(i)
    for i in order:
        p = points[i]
        if far_from_net(p):
            net.append(int(i))
            grid.setdefault(cell_of(p), []).append(int(i))
    return net


def _nearest_net(points: np.ndarray, query: np.ndarray, net: list[int]) -> np.ndarray:
    """Index into `net` of the nearest net point per query.

    Exact-distance ties go to the net point with the lexicographically
    smallest coordinates.  (Index-based tie-breaks funnel the exactly-midway
    children that regular grids produce into far-away cubes; the coordinate
    rule keeps assignments local and is just as deterministic.)
    """
    net_pts = points[np.asarray(net, dtype=np.intp)]
    tree = cKDTree(net_pts)
    k = min(2, len(net))
    d, idx = tree.query(query, k=k)
    if k == 1:
        return np.zeros(len(np.atleast_2d(query)), dtype=np.intp)
    d = np.atleast_2d(d)
    idx = np.atleast_2d(idx)
    owner = idx[:, 0].astype(np.intp)
    close = d[:, 1] - d[:, 0] <= 1e-12 * (d[:, 0] + 1e-300)
    tie_rows = np.nonzero(close)[0]
    if tie_rows.size:
        kk = min(8, len(net))
        dt, it = tree.query(np.atleast_2d(query)[tie_rows], k=kk)
        dt = np.atleast_2d(dt)
        it = np.atleast_2d(it)
        for row, (drow, irow) in zip(tie_rows, zip(dt, it)):
            cands = irow[drow <= drow[0] * (1 + 1e-12)]
            coords = net_pts[cands]
            best = np.lexsort((coords[:, 1], coords[:, 0]))[0]
            owner[row] = cands[best]
    return owner


def build_lattice(mu: DiscreteMeasure, j_min: int, j_max: int) -> CubeLattice:
    """Build the nested cube decomposition for levels j_min..j_max.

    Level j cubes have side scale * 2^-j with scale = diam(spt mu).  The
    finest side must stay at least 4 discretization pitches, otherwise the
    point cloud cannot resolve the level.
    """
    if j_min > j_max:
        raise ValueError("need j_min <= j_max")
    scale = mu.diam
    if scale == 0.0:
        raise ValueError("measure support is a single point")
    if mu.h is not None and scale * 2.0 ** (-j_max) < 4.0 * mu.h:
        raise ResolutionExhaustedError(
            f"finest side {scale * 2.0 ** (-j_max):.3g} is below 4h = {4 * mu.h:.3g}"
        )

    pts = mu.points
    order = _scan_order(mu)
    nets: dict[int, list[int]] = {}
    net: list[int] = []
    for j in range(j_min, j_max + 1):
        sep = scale * 2.0 ** (-j)
        # Separation at 0.9 of the side leaves room for the boundary cubes
        # (pure Voronoi nets leave half-width slivers at support edges), and
        # the extra half-pitch keeps the refinement window between
        # commensurate seeds from degenerating to a single off-grid point.
        eff = _SEPARATION_FACTOR * sep
        if mu.h is not None:
            eff -= 0.5 * mu.h
        net = _greedy_net(pts, order, max(eff, 0.5 * sep), net)
        nets[j] = net

    levels: dict[int, list[Cube]] = {}

    # finest level: nearest-net membership
    owner = _nearest_net(pts, pts, nets[j_max])
    groups: dict[int, list[int]] = {}
    for pi, oi in enumerate(owner):
        groups.setdefault(int(oi), []).append(pi)
    levels[j_max] = _make_level(mu, j_max, scale, nets[j_max], groups)
    _merge_runts(mu, levels, j_max, scale)

    for j in range(j_max - 1, j_min - 1, -1):
        child_centers = np.array([q.center for q in levels[j + 1]])
        owner = _nearest_net(pts, child_centers, nets[j])
        groups = {}
        for ci, oi in enumerate(owner):
            groups.setdefault(int(oi), []).append(ci)
        cubes = []
        for net_pos, ci_list in sorted(groups.items()):
            members = np.sort(np.concatenate(
                [levels[j + 1][ci].members for ci in ci_list]))
            center_idx = nets[j][net_pos]
            cube = Cube(
                level=j,
                index=len(cubes),
                center_idx=center_idx,
                members=members,
                center=pts[center_idx].copy(),
                side=scale * 2.0 ** (-j),
                mass=stable_sum(mu.weights[members]),
                diam=_point_set_diameter(pts[members]),
                children=[(j + 1, ci) for ci in ci_list],
            )
            cubes.append(cube)
        levels[j] = cubes
        _merge_runts(mu, levels, j, scale)
        for q in levels[j]:
            for key in q.children:
                levels[j + 1][key[1]].parent = (j, q.index)

    lattice = CubeLattice(mu, j_min, j_max, scale, levels)
    return lattice


def _make_level(mu, j, scale, net, groups) -> list[Cube]:
    pts = mu.points
    cubes = []
    for net_pos, member_list in sorted(groups.items()):
        members = np.sort(np.asarray(member_list, dtype=np.intp))
        center_idx = net[net_pos]
        cubes.append(Cube(
            level=j,
            index=len(cubes),
            center_idx=center_idx,
            members=members,
            center=pts[center_idx].copy(),
            side=scale * 2.0 ** (-j),
            mass=stable_sum(mu.weights[members]),
            diam=_point_set_diameter(pts[members]),
        ))
    return cubes


def _merge_runts(mu, levels, j, scale) -> None:
    """Absorb slivers (diam < 0.6 side) into the nearest same-level cube."""
    cubes = levels[j]
    side = scale * 2.0 ** (-j)
    while len(cubes) >= 2:
        runt_pos = next((i for i, q in enumerate(cubes)
                         if q.diam < _MERGE_FRACTION * side), None)
        if runt_pos is None:
            break
        runt = cubes.pop(runt_pos)
        centers = np.array([q.center for q in cubes])
        d = np.hypot(centers[:, 0] - runt.center[0], centers[:, 1] - runt.center[1])
        near = np.nonzero(d <= d.min() * (1 + 1e-12))[0]
        best = near[np.lexsort((centers[near, 1], centers[near, 0]))[0]]
        target = cubes[int(best)]
        target.members = np.sort(np.concatenate([target.members, runt.members]))
        target.children.extend(runt.children)
        target.mass = stable_sum(mu.weights[target.members])
        target.diam = _point_set_diameter(mu.points[target.members])
    for i, q in enumerate(cubes):
        q.index = i


def balanced_points(mu: DiscreteMeasure, q: Cube):
    """Farthest pair of member points and the observed separation ratio.

    Returns (x0, x1, eta_observed) with a lexicographic index tie-break, so
    the pair is reproducible.  eta_observed = |x1 - x0| / side.
    """
    if q.members.size < 2:
        raise DegenerateCubeError(f"cube {q.id} has fewer than 2 members")
    i, j = _farthest_pair(mu.points, q.members)
    x0, x1 = mu.points[i], mu.points[j]
    eta = float(np.hypot(*(x1 - x0))) / q.side
    return x0.copy(), x1.copy(), eta


def _farthest_pair(pts: np.ndarray, members: np.ndarray) -> tuple[int, int]:
    sub = pts[members]
    if members.size > 40:
        try:
            from scipy.spatial import ConvexHull, QhullError

            cand = members[np.sort(ConvexHull(sub).vertices)]
        except Exception:
            ext = [sub[:, 0].argmin(), sub[:, 0].argmax(),
                   sub[:, 1].argmin(), sub[:, 1].argmax()]
            cand = members[np.sort(np.unique(ext))]
    else:
        cand = members
    cpts = pts[cand]
    diff = cpts[:, None, :] - cpts[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    best = dist.max()
    ii, jj = np.nonzero(dist >= best)
    pairs = sorted((min(int(cand[a]), int(cand[b])), max(int(cand[a]), int(cand[b])))
                   for a, b in zip(ii, jj) if a != b)
    return pairs[0]


def balanced_line(x0, x1) -> Line:
    """The unique line through a balanced pair."""
    return Line.from_points(x0, x1)


def good_balanced_points(mu: DiscreteMeasure, q: Cube, A: float, c_star: float,
                         *, max_retries: int = 8):
    """Far pair restricted to members passing the two good-point filters.

    Filter F keeps members close to the beta_2-minimizing line of the cube's
    ball (distance <= c_star * beta_2(Q) * side); filter G keeps members whose
    multiscale beta(y, Q)^2 is at most c_star times the cube average.  If
    fewer than two members survive, c_star doubles, mirroring the Chebyshev
    selection argument, up to `max_retries` times.

    The G filter is evaluated on a deterministic subsample of at most 64
    extreme members (by projection onto the fitted line) to keep the cost of
    the per-member multiscale integrals bounded.
    """
    if A <= 1:
        raise ValueError("need A > 1")
    if q.members.size < 2:
        raise DegenerateCubeError(f"cube {q.id} has fewer than 2 members")
    from .beta import beta_cube, beta_point_cube

    bq = beta_cube(mu, q)
    pts = mu.points[q.members]
    dist_f = bq.line.distance(pts)

    proj = pts @ bq.line.direction
    order = np.argsort(proj, kind="stable")
    if order.size > 64:
        cand_pos = np.concatenate([order[:32], order[-32:]])
    else:
        cand_pos = order
    cand_pos = np.unique(cand_pos)

    beta_sq = np.array([
        beta_point_cube(mu, mu.points[q.members[p]], q, A) ** 2 for p in cand_pos
    ])
    w = mu.weights[q.members[cand_pos]]
    mean_beta_sq = float((w * beta_sq).sum() / w.sum())

    c = float(c_star)
    for _ in range(max_retries + 1):
        keep = (dist_f[cand_pos] <= c * bq.beta * q.side) & (beta_sq <= c * mean_beta_sq)
        good = q.members[cand_pos[keep]]
        if good.size >= 2:
            i, j = _farthest_pair(mu.points, good)
            return mu.points[i].copy(), mu.points[j].copy()
        c *= 2.0
    raise NoGoodPointsError(
        f"cube {q.id}: good-point filters empty after {max_retries} doublings"
    )
