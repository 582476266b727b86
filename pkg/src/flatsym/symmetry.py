"""Symmetry functionals of discrete measures against odd kernels.

The centered first-moment functional C(x, r) = r^-2 sum w K(x-p) over the
open ball vanishes identically on measures that are centrally symmetric about
each support point (lines, equidistant line families).  Its smooth-cutoff and
Riesz-type variants vanish on the same class, which makes the sup over
sampled centers and scales a usable symmetry defect.

The linear/error decomposition of C_phi differences is computed term by term:
T = A2 + B121 from the kernel's first derivative and the cutoff's slope, and
E as the residual (C_phi(x) - C_phi(x0)) - T(x).  The mean-value terms of the
analytic error expansion are not computable pointwise, but the residual
coincides with them exactly whenever the measure is symmetric, which is the
regime the bounds get tested in.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cubes import Cube, balanced_points
from .errors import InvalidCutoffError
from .kernel import OmegaMap
from .measure import DiscreteMeasure, stable_vec_sum
from .parallel import parallel_map

__all__ = [
    "CutoffSpec",
    "SymmetryReport",
    "PVProfile",
    "TPairingReport",
    "sharp_cutoff",
    "annulus_cutoff",
    "tail_cutoff",
    "c_omega",
    "c_omega_smooth",
    "riesz_truncated",
    "pv_profile",
    "linear_term_T",
    "error_term_E",
    "b121_parts",
    "t_pairing_report",
    "defect_report",
]

_FUNCTIONALS = ("c_omega", "c_omega_smooth", "riesz")


def _smoothstep(u):
    """Quintic step: 0 at 0, 1 at 1, first and second derivative zero at both."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 + u * (6.0 * u - 15.0))


def _smoothstep_d(u):
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * u ** 2 * (u - 1.0) ** 2, 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    """C^2 radial cutoff acting on the squared-radius variable s = |x/r|^2.

    kind 'sharp' is the indicator of the unit ball (the raw functional);
    'phi_annulus' is the difference of two nested smooth bumps, supported on
    s in [1/4, 4], i.e. |x| in [r/2, 2r]; 'varphi_tail' rises from 0 on
    [0, 1/2] to 1 on [1, inf).
    """

    kind: str

    def phi(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "sharp":
            return (s < 1.0).astype(float)
        if self.kind == "phi_annulus":
            return self._chi_half(s / 4.0) - self._chi_half(s)
        if self.kind == "varphi_tail":
            return _smoothstep(2.0 * s - 1.0)
        raise InvalidCutoffError(f"unknown cutoff kind {self.kind!r}")

    def dphi(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "phi_annulus":
            return 0.25 * self._chi_half_d(s / 4.0) - self._chi_half_d(s)
        if self.kind == "varphi_tail":
            return 2.0 * _smoothstep_d(2.0 * s - 1.0)
        raise InvalidCutoffError(f"cutoff kind {self.kind!r} has no usable slope")

    @staticmethod
    def _chi_half(s):
        # 1 on [0, 1/4], 0 beyond 1: indicator sandwich of B(0,1/2) vs B(0,1)
        return 1.0 - _smoothstep((s - 0.25) / 0.75)

    @staticmethod
    def _chi_half_d(s):
        return -_smoothstep_d((s - 0.25) / 0.75) / 0.75


def sharp_cutoff() -> CutoffSpec:
    return CutoffSpec("sharp")


def annulus_cutoff() -> CutoffSpec:
    return CutoffSpec("phi_annulus")


def tail_cutoff() -> CutoffSpec:
    return CutoffSpec("varphi_tail")


def _kernel_at(om: OmegaMap, d: np.ndarray):
    """K on an array of nonzero difference vectors: (|d|, angle, K values)."""
    n = np.hypot(d[:, 0], d[:, 1])
    t = np.arctan2(d[:, 1], d[:, 0])
    w = np.asarray(om.omega(t))
    K = np.empty_like(d)
    K[:, 0] = n * np.cos(w)
    K[:, 1] = n * np.sin(w)
    return n, t, K


def c_omega(mu: DiscreteMeasure, om: OmegaMap, x, r: float) -> np.ndarray:
    """C(x, r) = r^-2 sum_{|x-p|<r} w K(x-p), with the K(0) := 0 convention."""
    x = np.asarray(x, dtype=float)
    idx = mu.ball_indices(x, r)
    d = x - mu.points[idx]
    nz = np.hypot(d[:, 0], d[:, 1]) > 0.0
    idx, d = idx[nz], d[nz]
    if idx.size == 0:
        return np.zeros(2)
    _, _, K = _kernel_at(om, d)
    return stable_vec_sum(mu.weights[idx, None] * K) / r ** 2


def c_omega_smooth(mu: DiscreteMeasure, om: OmegaMap, x, r: float,
                   cutoff: CutoffSpec) -> np.ndarray:
    """Smooth-cutoff variant; support confined to the annulus A(x, r/2, 2r)."""
    if cutoff.kind != "phi_annulus":
        raise InvalidCutoffError("c_omega_smooth needs the phi_annulus cutoff")
    x = np.asarray(x, dtype=float)
    idx = mu.ball_indices(x, 2.0 * r)
    d = x - mu.points[idx]
    n = np.hypot(d[:, 0], d[:, 1])
    keep = n > 0.5 * r  # phi vanishes on [0, 1/4] in the s variable
    idx, d, n = idx[keep], d[keep], n[keep]
    if idx.size == 0:
        return np.zeros(2)
    _, _, K = _kernel_at(om, d)
    ph = cutoff.phi((n / r) ** 2)
    return stable_vec_sum((mu.weights[idx] * ph)[:, None] * K) / r ** 2


def riesz_truncated(mu: DiscreteMeasure, om: OmegaMap, x, r: float,
                    cutoff: CutoffSpec, r_out: float | None = None) -> np.ndarray:
    """Riesz-type functional sum w K(x-p)/|x-p|^2 varphi(|x-p|^2/r^2).

    The tail cutoff has no outer truncation, so on a *truncated* sample of an
    unbounded symmetric measure the asymmetric leftover tail dominates; pass
    ``r_out`` to sum over the symmetric window B(x, r_out) instead.  Windowed
    sums still vanish exactly on symmetric measures (annular integrals of an
    odd kernel do).
    """
    if cutoff.kind != "varphi_tail":
        raise InvalidCutoffError("riesz_truncated needs the varphi_tail cutoff")
    x = np.asarray(x, dtype=float)
    if r_out is None:
        idx = np.arange(len(mu), dtype=np.intp)
    else:
        idx = mu.ball_indices(x, r_out)
    d = x - mu.points[idx]
    n = np.hypot(d[:, 0], d[:, 1])
    keep = n > r / math.sqrt(2.0)  # varphi vanishes on [0, 1/2]
    idx, d, n = idx[keep], d[keep], n[keep]
    if idx.size == 0:
        return np.zeros(2)
    _, _, K = _kernel_at(om, d)
    ph = cutoff.phi((n / r) ** 2)
    return stable_vec_sum((mu.weights[idx] * ph / n ** 2)[:, None] * K)


@dataclass(frozen=True)
class PVProfile:
    """Truncated principal-value integrals over shrinking inner radii."""

    epsilons: tuple[float, ...]
    values: np.ndarray  # (n, 2)
    r_out: float

    @property
    def successive_diffs(self) -> np.ndarray:
        d = np.diff(self.values, axis=0)
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def max_successive_diff(self) -> float:
        s = self.successive_diffs
        return float(s.max()) if s.size else 0.0


def pv_profile(mu: DiscreteMeasure, om: OmegaMap, x, epsilons,
               r_out: float) -> PVProfile:
    """Integrals of K(x-y)/|x-y|^2 over B(x, r_out) minus B(x, eps).

    The Cauchy-sequence diagnostic (max successive difference) is how the
    existence of the principal value shows up at desk scale.
    """
    eps = [float(e) for e in epsilons]
    if not eps or any(e <= 0 for e in eps):
        raise ValueError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    x = np.asarray(x, dtype=float)
    idx = mu.ball_indices(x, r_out)
    d = x - mu.points[idx]
    n = np.hypot(d[:, 0], d[:, 1])
    nz = n > 0.0
    idx, d, n = idx[nz], d[nz], n[nz]
    vals = np.zeros((len(eps), 2))
    if idx.size:
        _, _, K = _kernel_at(om, d)
        contrib = (mu.weights[idx] / n ** 2)[:, None] * K
        for i, e in enumerate(eps):
            keep = n >= e
            vals[i] = stable_vec_sum(contrib[keep])
    return PVProfile(tuple(eps), vals, float(r_out))


# ---------------------------------------------------------------------------
# linear / error decomposition around a cube


def _translated_annulus(mu, om, x0, r):
    """Support differences y = p - x0 on the phi-annulus, with kernel data."""
    x0 = np.asarray(x0, dtype=float)
    idx = mu.ball_indices(x0, 2.0 * r)
    y = mu.points[idx] - x0
    n = np.hypot(y[:, 0], y[:, 1])
    keep = n > 0.5 * r
    idx, y, n = idx[keep], y[keep], n[keep]
    w = mu.weights[idx]
    t = np.arctan2(y[:, 1], y[:, 0])
    return y, n, w, t


def _dk_terms(om, y, n, t, x):
    """Radial and spherical pieces of DK(y) x (DK is even, so DK(-y) = DK(y))."""
    wv = np.asarray(om.omega(t))
    cw, sw = np.cos(wv), np.sin(wv)
    w1 = np.asarray(om.omega_prime(t))
    yhx, yhy = y[:, 0] / n, y[:, 1] / n
    rad_c = yhx * x[0] + yhy * x[1]          # <yhat, x>
    sph_c = -yhy * x[0] + yhx * x[1]         # <x, yhat_perp>
    radial = np.column_stack([rad_c * cw, rad_c * sw])
    spherical = np.column_stack([-sph_c * w1 * sw, sph_c * w1 * cw])
    return radial, spherical, cw, sw


def linear_term_T(mu: DiscreteMeasure, om: OmegaMap, q: Cube, r: float, x,
                  *, x0=None) -> np.ndarray:
    """T(x) = A2(x) + B121(x) in coordinates translated so x0 = 0.

    x0 defaults to the cube's first balanced point.  The scale window
    r in [A side, 2A side] is the caller's responsibility; values outside it
    are computed as asked.
    """
    x = np.asarray(x, dtype=float)
    if x0 is None:
        x0 = balanced_points(mu, q)[0]
    y, n, w, t = _translated_annulus(mu, om, x0, r)
    if y.shape[0] == 0:
        return np.zeros(2)
    cutoff = annulus_cutoff()
    s = (n / r) ** 2
    ph = cutoff.phi(s)
    dph = cutoff.dphi(s)
    radial, spherical, cw, sw = _dk_terms(om, y, n, t, x)
    dk = radial + spherical
    a2 = stable_vec_sum((w * ph)[:, None] * dk) / r ** 2
    # <K(y), DK(y) x> with K(y) = n (cw, sw); the spherical part is exactly
    # orthogonal to K pointwise, so only the radial piece survives
    k_dot_dk = n * (cw * dk[:, 0] + sw * dk[:, 1])
    Ky = np.column_stack([n * cw, n * sw])
    b121 = stable_vec_sum((w * dph * k_dot_dk)[:, None] * Ky) / r ** 4
    return a2 + b121


def b121_parts(mu: DiscreteMeasure, om: OmegaMap, q: Cube, r: float, x,
               *, x0=None):
    """B121 split into its radial-derivative and spherical-derivative parts.

    The spherical part pairs K(y) with a tangent vector, so its inner product
    with K(y) vanishes pointwise; it is returned anyway so the cancellation
    can be asserted rather than assumed.
    """
    x = np.asarray(x, dtype=float)
    if x0 is None:
        x0 = balanced_points(mu, q)[0]
    y, n, w, t = _translated_annulus(mu, om, x0, r)
    if y.shape[0] == 0:
        return np.zeros(2), np.zeros(2)
    cutoff = annulus_cutoff()
    s = (n / r) ** 2
    dph = cutoff.dphi(s)
    radial, spherical, cw, sw = _dk_terms(om, y, n, t, x)
    Ky = np.column_stack([n * cw, n * sw])
    dot_rad = n * (cw * radial[:, 0] + sw * radial[:, 1])
    dot_sph = n * (cw * spherical[:, 0] + sw * spherical[:, 1])
    part_rad = stable_vec_sum((w * dph * dot_rad)[:, None] * Ky) / r ** 4
    part_sph = stable_vec_sum((w * dph * dot_sph)[:, None] * Ky) / r ** 4
    return part_rad, part_sph


def error_term_E(mu: DiscreteMeasure, om: OmegaMap, q: Cube, r: float, x,
                 *, x0=None) -> np.ndarray:
    """Residual error term E(x) = (C_phi(x0 + x, r) - C_phi(x0, r)) - T(x).

    Equals the analytic error expansion exactly on symmetric measures, where
    both C_phi values vanish; E(0) = 0 identically.
    """
    x = np.asarray(x, dtype=float)
    if x0 is None:
        x0 = balanced_points(mu, q)[0]
    x0 = np.asarray(x0, dtype=float)
    cutoff = annulus_cutoff()
    c_x = c_omega_smooth(mu, om, x0 + x, r, cutoff)
    c_0 = c_omega_smooth(mu, om, x0, r, cutoff)
    return (c_x - c_0) - linear_term_T(mu, om, q, r, x, x0=x0)


def _rot90(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


@dataclass(frozen=True)
class TPairingReport:
    """Both pairings of the T lower bound at an off-line probe direction.

    The statement pairs T(e_z) with Omega(e_z), the argument behind it with
    the image-line normal nu; neither is privileged here, both dot products
    are reported (scaled by r, so the expected size is an O(1) constant).
    """

    r: float
    e_z: np.ndarray
    nu: np.ndarray
    t_vec: np.ndarray
    pair_nu: float        # -<T(e_z), nu> * r
    pair_omega_ez: float  # -<T(e_z), Omega(e_z)> * r


def t_pairing_report(mu: DiscreteMeasure, om: OmegaMap, q: Cube, r: float,
                     *, x0=None, x1=None) -> TPairingReport:
    """Evaluate T at the unit normal probe e_z below the balanced line.

    The probe z = z_Q - c ell(Q) nu sits in 3Q off L_Q on the side where
    e_z = -nu, the orientation for which the identity kernel's bound comes
    out positive.
    """
    if x0 is None or x1 is None:
        b0, b1, _ = balanced_points(mu, q)
        x0 = b0 if x0 is None else np.asarray(x0, dtype=float)
        x1 = b1 if x1 is None else np.asarray(x1, dtype=float)
    e_x1 = (x1 - x0) / np.hypot(*(x1 - x0))
    nu = _rot90(np.asarray(om.unit(math.atan2(e_x1[1], e_x1[0]))))
    e_z = -nu
    t_vec = linear_term_T(mu, om, q, r, e_z, x0=x0)
    om_ez = np.asarray(om.unit(math.atan2(e_z[1], e_z[0])))
    return TPairingReport(
        r=float(r),
        e_z=e_z,
        nu=nu,
        t_vec=t_vec,
        pair_nu=float(-(t_vec @ nu) * r),
        pair_omega_ez=float(-(t_vec @ om_ez) * r),
    )


# ---------------------------------------------------------------------------
# defect aggregation


@dataclass
class SymmetryReport:
    """Sup-norm of one functional over sampled centers and geometric scales."""

    functional: str
    centers: np.ndarray          # (n_c, 2)
    scales: np.ndarray           # (n_s,)
    values: np.ndarray           # (n_c, n_s, 2)
    sup_norm: float
    h: float | None
    interior_margin: float
    riesz_outer: float | None = None

    @property
    def norms(self) -> np.ndarray:
        return np.hypot(self.values[..., 0], self.values[..., 1])

    def tolerance_context(self) -> dict:
        return {
            "h": self.h,
            "r_min": float(self.scales.min()),
            "r_max": float(self.scales.max()),
            "interior_margin": self.interior_margin,
            "riesz_outer": self.riesz_outer,
        }

    def to_json_dict(self, invocation: str | None = None) -> dict:
        out = {
            "functional": self.functional,
            "centers": self.centers.tolist(),
            "scales": self.scales.tolist(),
            "values": self.values.tolist(),
            "sup_norm": self.sup_norm,
            "tolerance_context": self.tolerance_context(),
        }
        if invocation:
            out["invocation"] = invocation
        return out

    def dump_json(self, path, invocation: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(invocation), f, indent=1)
            f.write("\n")

    def dump_csv(self, path, invocation: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as f:
            if invocation:
                f.write(f"# {invocation}\n")
            f.write("center_x,center_y,scale,value_x,value_y,norm\n")
            for i, c in enumerate(self.centers):
                for j, s in enumerate(self.scales):
                    v = self.values[i, j]
                    f.write(f"{c[0]!r},{c[1]!r},{s!r},{v[0]!r},{v[1]!r},"
                            f"{float(np.hypot(v[0], v[1]))!r}\n")


def defect_report(
    mu: DiscreteMeasure,
    om: OmegaMap,
    n_centers: int,
    scale_range: tuple[float, float],
    functional: str = "c_omega",
    *,
    n_scales: int = 10,
    interior_margin: float = 0.0,
    riesz_outer: float | None = None,
    seed: int = 0,
    threads: int = 1,
) -> SymmetryReport:
    """Sup of |functional| over sampled support centers and geometric scales.

    Centers are a seeded permutation prefix of the eligible support points;
    ``interior_margin`` excludes points near the sample's bounding box, where
    a truncated stand-in for an unbounded measure stops being symmetric.
    """
    if functional not in _FUNCTIONALS:
        raise ValueError(f"functional must be one of {_FUNCTIONALS}")
    r_min, r_max = float(scale_range[0]), float(scale_range[1])
    if r_min <= 0 or r_min > r_max:
        raise ValueError("need 0 < r_min <= r_max")
    eligible = mu.interior_indices(interior_margin)
    if eligible.size == 0:
        raise ValueError("interior margin excluded every support point")
    rng = np.random.default_rng(seed)
    take = rng.permutation(eligible.size)[: min(n_centers, eligible.size)]
    centers = mu.points[eligible[take]]
    scales = np.geomspace(r_min, r_max, n_scales) if n_scales > 1 else np.array([r_min])

    cut_s = annulus_cutoff()
    cut_v = tail_cutoff()

    def eval_center(c):
        row = np.empty((len(scales), 2))
        for j, r in enumerate(scales):
            if functional == "c_omega":
                row[j] = c_omega(mu, om, c, float(r))
            elif functional == "c_omega_smooth":
                row[j] = c_omega_smooth(mu, om, c, float(r), cut_s)
            else:
                row[j] = riesz_truncated(mu, om, c, float(r), cut_v,
                                         r_out=riesz_outer)
        return row

    rows = parallel_map(eval_center, centers, threads)
    values = np.stack(rows) if rows else np.zeros((0, len(scales), 2))
    sup = float(np.hypot(values[..., 0], values[..., 1]).max()) if values.size else 0.0
    return SymmetryReport(
        functional=functional,
        centers=centers,
        scales=scales,
        values=values,
        sup_norm=sup,
        h=mu.h,
        interior_margin=interior_margin,
        riesz_outer=riesz_outer,
    )
