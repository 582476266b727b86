"""Synthetic measure generators for the standard example configurations.

Weights are local 1-D density times the pitch h (h^2 on the planar grid), so
the clouds approximate arc-length measures.  Everything is deterministic
given the parameters; the only random generator (perturbed_line) is seeded.
"""

import math
from dataclasses import dataclass

import numpy as np

from .measure import DiscreteMeasure

__all__ = ["GeneratorSpec", "generate", "GENERATOR_KINDS"]

GENERATOR_KINDS = (
    "line",
    "segment",
    "equidistant_lines",
    "circle",
    "cross",
    "lipschitz_graph",
    "lebesgue_grid",
    "perturbed_line",
)


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters for one synthetic measure.

    kind: one of GENERATOR_KINDS.
    h: discretization pitch (arc-length spacing; grid step for lebesgue_grid).
    extent: overall length (diameter of the configuration along its axis);
        radius for 'circle', square side for 'lebesgue_grid'.
    m: number of lines (equidistant_lines).
    gap: line spacing (equidistant_lines).
    amplitude: graph amplitude (lipschitz_graph: y = amplitude * sin x).
    noise: transverse Gaussian sigma (perturbed_line).
    angle: rotation of the line direction, radians (line/segment/perturbed_line).
    seed: RNG seed for the noisy generator.
    """

    kind: str
    h: float = 1e-3
    extent: float = 10.0
    m: int = 5
    gap: float = 1.0
    amplitude: float = 0.01
    noise: float = 0.01
    angle: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.h <= 0 or self.extent <= 0:
            raise ValueError("h and extent must be positive")
        if self.kind == "equidistant_lines" and (self.m < 1 or self.gap <= 0):
            raise ValueError("equidistant_lines needs m >= 1 and gap > 0")


def _axis_samples(extent: float, h: float) -> np.ndarray:
    n = int(round(extent / h))
    return -extent / 2.0 + h * np.arange(n + 1)


def _rotate(points: np.ndarray, angle: float) -> np.ndarray:
    if angle == 0.0:
        return points
    c, s = math.cos(angle), math.sin(angle)
    return points @ np.array([[c, s], [-s, c]]).T


def generate(spec: GeneratorSpec) -> DiscreteMeasure:
    k, h, ext = spec.kind, spec.h, spec.extent

    if k in ("line", "segment"):
        t = _axis_samples(ext, h)
        if k == "segment":
            t = t + ext / 2.0  # from origin to (extent, 0)
        pts = np.column_stack([t, np.zeros_like(t)])
        return DiscreteMeasure(_rotate(pts, spec.angle),
                               np.full(t.size, h), h=h)

    if k == "equidistant_lines":
        t = _axis_samples(ext, h)
        rows = []
        for i in range(spec.m):
            y = (i - (spec.m - 1) / 2.0) * spec.gap
            rows.append(np.column_stack([t, np.full_like(t, y)]))
        pts = np.vstack(rows)
        return DiscreteMeasure(pts, np.full(len(pts), h), h=h)

    if k == "circle":
        radius = ext
        n = int(round(2.0 * math.pi * radius / h))
        ang = 2.0 * math.pi * np.arange(n) / n
        pts = radius * np.column_stack([np.cos(ang), np.sin(ang)])
        w = np.full(n, 2.0 * math.pi * radius / n)  # total mass exactly 2 pi R
        return DiscreteMeasure(pts, w, h=h)

    if k == "cross":
        t = _axis_samples(ext, h)
        horiz = np.column_stack([t, np.zeros_like(t)])
        keep = t != 0.0  # origin only once
        vert = np.column_stack([np.zeros(int(keep.sum())), t[keep]])
        pts = np.vstack([horiz, vert])
        return DiscreteMeasure(pts, np.full(len(pts), h), h=h)

    if k == "lipschitz_graph":
        t = _axis_samples(ext, h)
        y = spec.amplitude * np.sin(t)
        w = h * np.sqrt(1.0 + (spec.amplitude * np.cos(t)) ** 2)
        return DiscreteMeasure(np.column_stack([t, y]), w, h=h)

    if k == "lebesgue_grid":
        t = _axis_samples(ext, h)
        xx, yy = np.meshgrid(t, t, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        return DiscreteMeasure(pts, np.full(len(pts), h * h), h=h)

    if k == "perturbed_line":
        t = _axis_samples(ext, h)
        rng = np.random.default_rng(spec.seed)
        y = rng.normal(0.0, spec.noise, t.size)
        pts = np.column_stack([t, y])
        return DiscreteMeasure(_rotate(pts, spec.angle),
                               np.full(t.size, h), h=h)

    raise AssertionError(f"unhandled kind {k!r}")
