"""Jones beta coefficients of discrete measures.

beta_2 has a closed-form minimizer: the optimal affine line passes through
the weighted centroid of the ball and points along the top eigenvector of the
weighted covariance, and the residual is the smaller eigenvalue.  The 2x2
eigenproblem is solved in closed form so that exactly collinear clouds give
an exactly zero beta (the LAPACK path would leave noise at the 1e-16 level,
which matters for the flat-input tests downstream).

beta_1 has no closed form and is approximated by a grid scan plus local
simplex refinement; the returned value is an upper bound on the infimum by
construction.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import EmptyBallError, ScaleOutOfRangeError
from .measure import DiscreteMeasure, Line, stable_sum

__all__ = [
    "BetaValue",
    "BetaProfile",
    "beta2",
    "beta_p",
    "beta_cube",
    "multiscale_sum",
    "beta_point_cube",
]


@dataclass(frozen=True)
class BetaValue:
    beta: float
    line: Line
    x: tuple[float, float]
    t: float
    p: int
    tie: bool = False          # isotropic covariance; direction fell back to theta=0
    degenerate: bool = False   # fewer than 2 ball points


def _eig2x2(a: float, b: float, c: float):
    """Eigenvalues/top-direction of [[a, b], [b, c]], exact in degenerate cases.

    Returns (lam_min, lam_max, theta_top, tie).
    """
    m = 0.5 * (a + c)
    d = 0.5 * (a - c)
    gap = math.hypot(d, b)
    lam_max = m + gap
    lam_min = m - gap
    tie = gap <= 1e-12 * max(abs(m), 1e-300)
    if tie:
        return lam_min, lam_max, 0.0, True
    # eigenvector for lam_max: (b, lam_max - a) or (lam_max - c, b)
    if abs(lam_max - a) >= abs(lam_max - c):
        vx, vy = b, lam_max - a
    else:
        vx, vy = lam_max - c, b
    if vx == 0.0 and vy == 0.0:
        return lam_min, lam_max, 0.0, True
    theta = math.atan2(vy, vx) % math.pi
    if theta >= math.pi:
        theta = 0.0
    return lam_min, lam_max, theta, False


def beta2(mu: DiscreteMeasure, x, t: float) -> BetaValue:
    """Exact beta_{mu,2}(x, t) via weighted total least squares."""
    if t <= 0:
        raise ValueError(f"scale must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    idx = mu.ball_indices(x, t)
    if idx.size == 0:
        raise EmptyBallError(f"no support in B({x.tolist()}, {t})")
    pts = mu.points[idx]
    w = mu.weights[idx]
    if idx.size == 1:
        line = Line.from_point_angle(pts[0], 0.0)
        return BetaValue(0.0, line, (float(x[0]), float(x[1])), float(t), 2,
                         degenerate=True)
    wsum = stable_sum(w)
    cx = stable_sum(w * pts[:, 0]) / wsum
    cy = stable_sum(w * pts[:, 1]) / wsum
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    a = stable_sum(w * dx * dx)
    b = stable_sum(w * dx * dy)
    c = stable_sum(w * dy * dy)
    lam_min, _lam_max, theta, tie = _eig2x2(a, b, c)
    lam_min = max(lam_min, 0.0)
    beta = math.sqrt(lam_min / t ** 3)
    line = Line.from_point_angle((cx, cy), theta)
    return BetaValue(beta, line, (float(x[0]), float(x[1])), float(t), 2, tie=tie)


def _beta_p_objective(pts, w, x, t, p, theta, offset):
    n = np.array([-math.sin(theta), math.cos(theta)])
    d = np.abs(pts @ n - offset)
    return (stable_sum(w * (d / t) ** p) / t) ** (1.0 / p)


def beta_p(mu: DiscreteMeasure, x, t: float, p: int) -> BetaValue:
    """beta_{mu,p}; p=2 is exact, p=1 is grid search plus simplex refinement."""
    if p == 2:
        return beta2(mu, x, t)
    if p != 1:
        raise ValueError(f"unsupported exponent p={p}")
    x = np.asarray(x, dtype=float)
    idx = mu.ball_indices(x, t)
    if idx.size == 0:
        raise EmptyBallError(f"no support in B({x.tolist()}, {t})")
    pts = mu.points[idx]
    w = mu.weights[idx]
    if idx.size == 1:
        line = Line.from_point_angle(pts[0], 0.0)
        return BetaValue(0.0, line, (float(x[0]), float(x[1])), float(t), 1,
                         degenerate=True)

    thetas = np.arange(180) * math.pi / 180.0
    best = (math.inf, 0.0, 0.0)
    for th in thetas:
        n = np.array([-math.sin(th), math.cos(th)])
        proj = pts @ n
        center = float(x @ n)
        offsets = np.linspace(center - t, center + t, 64)
        d = np.abs(proj[:, None] - offsets[None, :])
        vals = (w[:, None] * d).sum(axis=0) / t ** 2
        j = int(vals.argmin())
        if vals[j] < best[0]:
            best = (float(vals[j]), float(th), float(offsets[j]))

    def obj(z):
        return _beta_p_objective(pts, w, x, t, 1, z[0], z[1])

    res = minimize(obj, np.array(best[1:]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
    th, off = (res.x if res.fun <= best[0] else np.array(best[1:]))
    val = min(float(res.fun), best[0])
    return BetaValue(val, Line(float(th), float(off)),
                     (float(x[0]), float(x[1])), float(t), 1)


def beta_cube(mu: DiscreteMeasure, q) -> BetaValue:
    """beta_2 of the cube's ball B(z_Q, 3 diam(Q))."""
    if q.diam == 0.0:
        line = Line.from_point_angle(q.center, 0.0)
        return BetaValue(0.0, line, (float(q.center[0]), float(q.center[1])),
                         0.0, 2, degenerate=True)
    return beta2(mu, q.center, 3.0 * q.diam)


@dataclass(frozen=True)
class BetaProfile:
    """Per-scale beta_2 values at radii 2^k * ell, k = 0..N, with partial sums."""

    x0: tuple[float, float]
    scales: tuple[float, ...]
    betas: tuple[float, ...]

    @property
    def cumulative(self) -> tuple[float, ...]:
        out = []
        acc = 0.0
        for b in self.betas:
            acc += b
            out.append(acc)
        return tuple(out)

    @property
    def total(self) -> float:
        return math.fsum(self.betas)

    def dump_csv(self, path, invocation: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as f:
            if invocation:
                f.write(f"# {invocation}\n")
            f.write("scale,beta,cumsum\n")
            for s, b, c in zip(self.scales, self.betas, self.cumulative):
                f.write(f"{s!r},{b!r},{c!r}\n")


def multiscale_sum(mu: DiscreteMeasure, x0, ell: float, N: int) -> BetaProfile:
    """beta_2 ladder at dyadic radii 2^k * ell for k = 0..N."""
    if ell <= 0:
        raise ValueError("ell must be positive")
    if N < 0:
        raise ValueError("N must be >= 0")
    if 2.0 ** N * ell > mu.diam:
        raise ScaleOutOfRangeError(
            f"top scale {2.0 ** N * ell:.3g} exceeds support diameter {mu.diam:.3g}"
        )
    x0 = np.asarray(x0, dtype=float)
    scales = [ell * 2.0 ** k for k in range(N + 1)]
    betas = [beta2(mu, x0, s).beta for s in scales]
    return BetaProfile((float(x0[0]), float(x0[1])), tuple(scales), tuple(betas))


def beta_point_cube(mu: DiscreteMeasure, y, q, A: float, panels: int = 8) -> float:
    """Multiscale beta(y, Q): the r-integral of beta_2(y, r)^2 dr/r.

    The integral over [A side, 2A side] is approximated by the midpoint rule
    on geometric subintervals (log-space midpoints), which is exact for an
    integrand constant in r up to the panel count's resolution.
    """
    if A <= 1:
        raise ValueError("need A > 1")
    y = np.asarray(y, dtype=float)
    lo = A * q.side
    du = math.log(2.0) / panels
    total = 0.0
    for j in range(panels):
        r = lo * math.exp((j + 0.5) * du)
        total += beta2(mu, y, r).beta ** 2 * du
    return math.sqrt(total)
