"""Closed contours in the complex plane with quadrature rules.

Every contour exposes ``nodes(n_quad)`` returning points ``z`` and complex
weights ``w`` such that ``sum(w * f(z))`` approximates the counter-clockwise
integral of ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = ["Circle", "Rectangle", "Arc", "ArcPath"]

GAUSS_PER_SEGMENT = 16


def _gauss_segment(a: complex, b: complex, nseg: int):
    t, w = leggauss(GAUSS_PER_SEGMENT)
    ends = a + (b - a) * np.linspace(0.0, 1.0, nseg + 1)
    z = [0.5 * (e1 - e0) * t + 0.5 * (e0 + e1) for e0, e1 in zip(ends[:-1], ends[1:])]
    wz = [0.5 * (e1 - e0) * w for e0, e1 in zip(ends[:-1], ends[1:])]
    return np.concatenate(z), np.concatenate(wz)


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def nodes(self, n_quad: int):
        # trapezoid rule: spectrally accurate for periodic integrands
        theta = 2.0 * math.pi * np.arange(n_quad) / n_quad
        e = np.exp(1j * theta)
        return self.center + self.radius * e, 1j * self.radius * e * (2.0 * math.pi / n_quad)

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def distance(self, z) -> np.ndarray:
        return np.abs(np.abs(np.asarray(z) - self.center) - self.radius)


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle ``[re_min, re_max] x [im_min, im_max]``.

    ``n_quad`` counts all nodes; each side gets ``n_quad // 64`` (at least one)
    segments of 16-point Gauss-Legendre.
    """

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def corners(self):
        return (
            complex(self.re_min, self.im_min),
            complex(self.re_max, self.im_min),
            complex(self.re_max, self.im_max),
            complex(self.re_min, self.im_max),
        )

    def nodes(self, n_quad: int):
        nseg = max(1, n_quad // (4 * GAUSS_PER_SEGMENT))
        c = self.corners()
        parts = [_gauss_segment(c[k], c[(k + 1) % 4], nseg) for k in range(4)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        return (z.real > self.re_min) & (z.real < self.re_max) & (z.imag > self.im_min) & (z.imag < self.im_max)

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z)
        dx = np.minimum(np.abs(z.real - self.re_min), np.abs(z.real - self.re_max))
        dy = np.minimum(np.abs(z.imag - self.im_min), np.abs(z.imag - self.im_max))
        inside_x = (z.real >= self.re_min) & (z.real <= self.re_max)
        inside_y = (z.imag >= self.im_min) & (z.imag <= self.im_max)
        d = np.where(inside_x & inside_y, np.minimum(dx, dy), np.inf)
        d = np.where(inside_x & ~inside_y, dy, d)
        d = np.where(~inside_x & inside_y, dx, d)
        return np.where(~inside_x & ~inside_y, np.hypot(dx, dy), d)


@dataclass(frozen=True)
class Arc:
    """Circular arc from angle ``t0`` to ``t1 > t0`` (counter-clockwise)."""

    center: complex
    radius: float
    t0: float
    t1: float


@dataclass(frozen=True)
class ArcPath:
    """Closed path made of counter-clockwise circular arcs.

    Used for the boundary of a union of overlapping disks.  ``disks`` lists
    ``(center, radius)`` so that membership tests use the union.
    """

    arcs: tuple
    disks: tuple

    def nodes(self, n_quad: int):
        total = sum(a.t1 - a.t0 for a in self.arcs)
        t, w = leggauss(GAUSS_PER_SEGMENT)
        zs, ws = [], []
        for a in self.arcs:
            nseg = max(1, int(round(n_quad * (a.t1 - a.t0) / total / GAUSS_PER_SEGMENT)))
            ends = np.linspace(a.t0, a.t1, nseg + 1)
            for e0, e1 in zip(ends[:-1], ends[1:]):
                th = 0.5 * (e1 - e0) * t + 0.5 * (e0 + e1)
                e = np.exp(1j * th)
                zs.append(a.center + a.radius * e)
                ws.append(1j * a.radius * e * 0.5 * (e1 - e0) * w)
        return np.concatenate(zs), np.concatenate(ws)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        inside = np.zeros(z.shape, dtype=bool)
        for c, r in self.disks:
            inside |= np.abs(z - c) < r
        return inside

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z)
        pts, _ = self.nodes(64 * len(self.arcs) * 8)
        return np.min(np.abs(z[..., None] - pts), axis=-1)
