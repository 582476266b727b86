"""Odd bi-Lipschitz circle maps and the kernel K(x) = |x| Omega(x/|x|).

The map Omega is represented through its angle lift
``omega(t) = t + p(t)`` with ``p(t) = sum_k a_k sin(2kt) + b_k (cos(2kt)-1)``.
The even frequencies make p pi-periodic, which is exactly the oddness
constraint Omega(-u) = -Omega(u); the ``cos(2kt)-1`` basis pins omega(0) = 0.
So every representable map satisfies the standing hypotheses by construction.

First and second kernel derivatives are assembled analytically from the
product rule; finite differences of :func:`K_eval` serve as the independent
check in the test suite.
"""

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .errors import (
    InadmissibleKernelError,
    KernelNotHomeomorphismError,
    UndefinedAtOriginError,
)

__all__ = [
    "OmegaMap",
    "LemmaReport",
    "omega_eval",
    "delta_omega",
    "K_eval",
    "DK_apply",
    "D2K_quadform",
    "check_dot_lemmas",
    "proof_inequality_margins",
    "load_kernel_json",
    "save_kernel_json",
    "ADMISSIBLE_DELTA",
]

ADMISSIBLE_DELTA = 1.0 / 20.0
_DERIV_GRID = 20000  # samples of omega' on [0, pi); >= 1e4 per contract


@dataclass(frozen=True)
class OmegaMap:
    """Circle map via its lift; immutable and safe to share across threads.

    ``coeffs`` is a tuple of (k, a_k, b_k) with integer frequency k >= 1.
    The identity map is ``OmegaMap(())``.
    """

    coeffs: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        norm = []
        for k, a, b in self.coeffs:
            k = int(k)
            if k < 1:
                raise ValueError(f"frequency must be >= 1, got {k}")
            norm.append((k, float(a), float(b)))
        object.__setattr__(self, "coeffs", tuple(norm))

    def _kab(self):
        if not self.coeffs:
            return np.empty(0), np.empty(0), np.empty(0)
        k = np.array([c[0] for c in self.coeffs], dtype=float)
        a = np.array([c[1] for c in self.coeffs])
        b = np.array([c[2] for c in self.coeffs])
        return k, a, b

    def omega(self, t):
        """Lift omega(t) = t + p(t); degree-1, defined for all real t."""
        t = np.asarray(t, dtype=float)
        k, a, b = self._kab()
        if k.size == 0:
            return t.copy() if t.ndim else float(t)
        tt = 2.0 * k * t[..., None]
        p = (a * np.sin(tt) + b * (np.cos(tt) - 1.0)).sum(axis=-1)
        out = t + p
        return out if out.ndim else float(out)

    def omega_prime(self, t):
        t = np.asarray(t, dtype=float)
        k, a, b = self._kab()
        if k.size == 0:
            return np.ones_like(t) if t.ndim else 1.0
        tt = 2.0 * k * t[..., None]
        d = (2.0 * k * (a * np.cos(tt) - b * np.sin(tt))).sum(axis=-1)
        out = 1.0 + d
        return out if out.ndim else float(out)

    def omega_pprime(self, t):
        t = np.asarray(t, dtype=float)
        k, a, b = self._kab()
        if k.size == 0:
            return np.zeros_like(t) if t.ndim else 0.0
        tt = 2.0 * k * t[..., None]
        d = (-4.0 * k * k * (a * np.sin(tt) + b * np.cos(tt))).sum(axis=-1)
        return d if d.ndim else float(d)

    def unit(self, t):
        """Point Omega(e^{it}) on the circle, shape (..., 2)."""
        w = np.asarray(self.omega(t))
        return np.stack([np.cos(w), np.sin(w)], axis=-1)

    @cached_property
    def _deriv_range(self) -> tuple[float, float]:
        # p' is pi-periodic: scan one period densely, then polish the
        # extrema by root-finding omega'' at its sign changes.
        t = np.linspace(0.0, math.pi, _DERIV_GRID, endpoint=False)
        d1 = self.omega_prime(t)
        lo, hi = float(d1.min()), float(d1.max())
        d2 = self.omega_pprime(t)
        sign = np.sign(d2)
        flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        for i in flips:
            try:
                root = brentq(self.omega_pprime, t[i], t[i + 1], xtol=1e-14)
            except ValueError:
                continue
            v = self.omega_prime(root)
            lo, hi = min(lo, v), max(hi, v)
        return lo, hi

    @cached_property
    def delta(self) -> float:
        """Bi-Lipschitz defect from the lift's derivative range."""
        lo, hi = self._deriv_range
        if lo <= 0.0:
            raise KernelNotHomeomorphismError(
                f"inf omega' = {lo:.6g} <= 0: lift is not strictly increasing"
            )
        return max(hi, 1.0 / lo) - 1.0

    @property
    def admissible(self) -> bool:
        return self.delta <= ADMISSIBLE_DELTA

    def require_admissible(self, override: bool = False) -> None:
        if not override and not self.admissible:
            raise InadmissibleKernelError(
                f"delta_Omega = {self.delta:.6g} exceeds {ADMISSIBLE_DELTA}"
            )


def omega_eval(om: OmegaMap, t):
    return om.omega(t)


def delta_omega(om: OmegaMap) -> float:
    return om.delta


def _check_nonzero(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    n = np.hypot(y[..., 0], y[..., 1])
    if np.any(n == 0.0):
        raise UndefinedAtOriginError("kernel derivative undefined at the origin")
    return n


def K_eval(om: OmegaMap, x):
    """K(x) = |x| Omega(x/|x|); accepts a single point or an (..., 2) array.

    K(0) is not defined here; integral code uses the odd-kernel convention
    K(0) := 0 by masking the origin before calling.
    """
    x = np.asarray(x, dtype=float)
    n = _check_nonzero(x)
    t = np.arctan2(x[..., 1], x[..., 0])
    return n[..., None] * om.unit(t)


def DK_apply(om: OmegaMap, y, v):
    """Differential of K at y applied to v.

    DK(y) v = <yhat, v> Omega(yhat) + <v, yhat_perp> omega'(arg y) Omega(yhat)_perp,
    with _perp the counter-clockwise quarter turn.  Broadcasts over leading
    axes of y; v may be a single vector or match y's shape.
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    n = _check_nonzero(y)
    t = np.arctan2(y[..., 1], y[..., 0])
    yh = y / n[..., None]
    w = np.asarray(om.omega(t))
    cw, sw = np.cos(w), np.sin(w)
    # <yhat, v> and <v, yhat_perp> with yhat_perp = (-yh_y, yh_x)
    rad = yh[..., 0] * v[..., 0] + yh[..., 1] * v[..., 1]
    sph = -yh[..., 1] * v[..., 0] + yh[..., 0] * v[..., 1]
    dw = np.asarray(om.omega_prime(t))
    out = np.empty(np.broadcast(y, v).shape)
    out[..., 0] = rad * cw + sph * dw * (-sw)
    out[..., 1] = rad * sw + sph * dw * cw
    return out


def D2K_quadform(om: OmegaMap, y, x):
    """The R^2-valued quadratic form x^T D^2K(y) x.

    Assembled from the product rule for K_i(y) = |y| f_i(arg y):
    the |y|-Hessian term, the symmetric (D|y|)(Df_i) cross terms, and
    |y| D^2 f_i split into the three matrices built from omega', omega''
    and the first/second derivatives of arg.  arg is taken in [0, 2pi);
    points on its discontinuity ray (the positive real axis) are reflected
    through the origin first, using that D^2 K is odd.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    n = _check_nonzero(y)
    shape = np.broadcast(y, x).shape
    y = np.broadcast_to(y, shape).copy()
    x = np.broadcast_to(x, shape)

    # reflect ray points: arg in [0, 2pi) is discontinuous across arg = 0
    on_ray = (y[..., 1] == 0.0) & (y[..., 0] > 0.0)
    sgn = np.where(on_ray, -1.0, 1.0)
    y = y * sgn[..., None]

    t = np.arctan2(y[..., 1], y[..., 0])
    t = np.where(t < 0.0, t + 2.0 * math.pi, t)
    w = np.asarray(om.omega(t))
    cw, sw = np.cos(w), np.sin(w)
    w1 = np.asarray(om.omega_prime(t))
    w2 = np.asarray(om.omega_pprime(t))

    n2 = n * n
    # grad arg = (-y2, y1)/|y|^2 ; grad |y| = yhat
    gax = -y[..., 1] / n2
    gay = y[..., 0] / n2
    xa = x[..., 0] * gax + x[..., 1] * gay          # <x, grad arg>
    xr = (x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]) / n  # <x, yhat>
    # x^T (Hess |y|) x = <x, yhat_perp>^2 / |y|
    xperp = (-x[..., 0] * y[..., 1] + x[..., 1] * y[..., 0]) / n
    h_norm = xperp * xperp / n
    # x^T (Hess arg) x, entries 2 y1 y2, y2^2-y1^2, -2 y1 y2 over |y|^4
    y1, y2 = y[..., 0], y[..., 1]
    h_arg = (
        x[..., 0] * x[..., 0] * (2.0 * y1 * y2)
        + 2.0 * x[..., 0] * x[..., 1] * (y2 * y2 - y1 * y1)
        - x[..., 1] * x[..., 1] * (2.0 * y1 * y2)
    ) / (n2 * n2)

    # f = (cos w, sin w); f' and f'' w.r.t. the angle variable
    f1p, f2p = -sw * w1, cw * w1
    f1pp = -cw * w1 * w1 - sw * w2
    f2pp = -sw * w1 * w1 + cw * w2

    q1 = cw * h_norm + 2.0 * xr * f1p * xa + n * (f1pp * xa * xa + f1p * h_arg)
    q2 = sw * h_norm + 2.0 * xr * f2p * xa + n * (f2pp * xa * xa + f2p * h_arg)
    out = np.stack([q1, q2], axis=-1)
    # odd second derivative: undo reflection
    return out * sgn[..., None]


@dataclass(frozen=True)
class LemmaReport:
    """Grid audit of the dot-product implications for one kernel."""

    grid_size: int
    cases: int
    violations_sign_nu: int
    violations_sign_el: int
    violations_abs_nu: int
    violations_abs_el: int
    min_dot_nu: float       # min <Omega(yhat), nu> where <yhat, nutilde> >= 1/10
    min_dot_el: float       # min <Omega(yhat), Omega(e_L)> where <yhat, e_L> >= 1/10
    max_abs_nu: float       # max |<Omega(yhat), nu>| where |<yhat, nutilde>| <= 1/10
    max_abs_el: float

    @property
    def total_violations(self) -> int:
        return (self.violations_sign_nu + self.violations_sign_el
                + self.violations_abs_nu + self.violations_abs_el)


def check_dot_lemmas(om: OmegaMap, grid_size: int, *, override: bool = False,
                     chunk: int = 256) -> LemmaReport:
    """Exhaustive grid check of the sign and absolute-value implications.

    Directions yhat = e^{i theta} run over grid_size angles in [0, 2pi),
    line angles over grid_size values in [0, pi).  With nutilde the line
    normal and nu the normal to the image line K(L), the inner products
    reduce to sin/cos of lift differences, so the whole grid is checked in
    vectorized chunks.
    """
    om.require_admissible(override)
    g = int(grid_size)
    th = 2.0 * math.pi * np.arange(g) / g
    tl = math.pi * np.arange(g) / g
    w_th = np.asarray(om.omega(th))
    w_tl = np.asarray(om.omega(tl))

    v_sn = v_se = v_an = v_ae = 0
    mn_nu = mn_el = math.inf
    mx_nu = mx_el = -math.inf
    for lo in range(0, g, chunk):
        hi = min(lo + chunk, g)
        d = th[lo:hi, None] - tl[None, :]
        wd = w_th[lo:hi, None] - w_tl[None, :]
        sd, cd = np.sin(d), np.cos(d)
        sw, cw = np.sin(wd), np.cos(wd)

        m = sd >= 0.1
        if m.any():
            v_sn += int(np.count_nonzero(sw[m] < 0.05))
            mn_nu = min(mn_nu, float(sw[m].min()))
        m = cd >= 0.1
        if m.any():
            v_se += int(np.count_nonzero(cw[m] < 0.05))
            mn_el = min(mn_el, float(cw[m].min()))
        m = np.abs(sd) <= 0.1
        if m.any():
            a = np.abs(sw[m])
            v_an += int(np.count_nonzero(a > 0.2))
            mx_nu = max(mx_nu, float(a.max()))
        m = np.abs(cd) <= 0.1
        if m.any():
            a = np.abs(cw[m])
            v_ae += int(np.count_nonzero(a > 0.2))
            mx_el = max(mx_el, float(a.max()))

    return LemmaReport(
        grid_size=g,
        cases=g * g,
        violations_sign_nu=v_sn,
        violations_sign_el=v_se,
        violations_abs_nu=v_an,
        violations_abs_el=v_ae,
        min_dot_nu=mn_nu,
        min_dot_el=mn_el,
        max_abs_nu=mx_nu,
        max_abs_el=mx_el,
    )


def proof_inequality_margins(n: int = 100_000) -> tuple[float, float]:
    """Min margins of sin(a) - a/20 >= sin(a)/2 and a/20 <= sin(a)/2 on (0, pi/2]."""
    a = np.linspace(0.0, math.pi / 2.0, n + 1)[1:]
    m1 = (np.sin(a) - a / 20.0) - 0.5 * np.sin(a)
    m2 = 0.5 * np.sin(a) - a / 20.0
    return float(m1.min()), float(m2.min())


def save_kernel_json(om: OmegaMap, path) -> None:
    payload = {"coeffs": [{"k": k, "a": a, "b": b} for k, a, b in om.coeffs]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def load_kernel_json(path) -> OmegaMap:
    """Read a kernel spec file; delta and admissibility are computed lazily."""
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    coeffs = tuple(
        (int(c["k"]), float(c.get("a", 0.0)), float(c.get("b", 0.0)))
        for c in payload.get("coeffs", [])
    )
    return OmegaMap(coeffs)
