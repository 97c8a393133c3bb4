"""Axis-aligned box and ball regions with interior/boundary samplers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UnsupportedDimension


def sample_ball(rng, center, radius, count):
    """Uniform points in the open ball B_radius(center); shape (count, n)."""
    center = np.asarray(center, dtype=float)
    n = len(center)
    dirs = rng.normal(size=(count, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    return center + radii * dirs


def sample_sphere(rng, center, radius, count):
    center = np.asarray(center, dtype=float)
    n = len(center)
    dirs = rng.normal(size=(count, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return center + radius * dirs


@dataclass(frozen=True)
class Region:
    """Bounded open region: `box(lo, hi)` or `ball(center, radius)`."""

    kind: str  # "box" | "ball"
    lo: tuple = ()
    hi: tuple = ()
    center: tuple = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "box":
            lo, hi = np.asarray(self.lo), np.asarray(self.hi)
            if lo.shape != hi.shape or lo.ndim != 1:
                raise DimensionMismatch("box bounds must be equal-length vectors")
            if np.any(lo >= hi):
                raise ValueError("box requires lo < hi per axis")
        elif self.kind == "ball":
            if self.radius <= 0:
                raise ValueError("ball requires radius > 0")
        else:
            raise ValueError(f"unknown region kind {self.kind!r}")

    @staticmethod
    def box(lo, hi) -> "Region":
        return Region("box", lo=tuple(float(v) for v in lo), hi=tuple(float(v) for v in hi))

    @staticmethod
    def ball(center, radius) -> "Region":
        return Region("ball", center=tuple(float(v) for v in center), radius=float(radius))

    @property
    def dim(self) -> int:
        return len(self.lo) if self.kind == "box" else len(self.center)

    def bounding_box(self):
        if self.kind == "box":
            return np.asarray(self.lo), np.asarray(self.hi)
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def contains(self, x, slack=0.0):
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            lo, hi = self.bounding_box()
            return bool(np.all(x > lo - slack) and np.all(x < hi + slack))
        return bool(np.linalg.norm(x - np.asarray(self.center)) < self.radius + slack)

    def grid(self, resolution):
        """Regular grid including the boundary, shape (resolution**n, n)."""
        lo, hi = self.bounding_box()
        axes = [np.linspace(lo[i], hi[i], resolution) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def sample_interior(self, rng, count):
        if self.kind == "ball":
            return sample_ball(rng, self.center, self.radius, count)
        lo, hi = self.bounding_box()
        return rng.uniform(lo, hi, size=(count, self.dim))

    def sample_boundary(self, rng, count):
        if self.kind == "ball":
            return sample_sphere(rng, self.center, self.radius, count)
        lo, hi = self.bounding_box()
        pts = rng.uniform(lo, hi, size=(count, self.dim))
        faces = rng.integers(0, 2 * self.dim, size=count)
        for k in range(count):
            axis, side = divmod(faces[k], 2)
            pts[k, axis] = hi[axis] if side else lo[axis]
        return pts

    def boundary_path_2d(self, t):
        """Closed boundary parametrization b(t), t in [0, 1); n = 2 only.

        Ball: circle. Box: rectangle perimeter, counterclockwise. Both
        orientations are positive (counterclockwise).
        """
        if self.dim != 2:
            raise UnsupportedDimension("boundary path requires a planar region")
        t = np.asarray(t, dtype=float) % 1.0
        if self.kind == "ball":
            ang = 2 * np.pi * t
            c = np.asarray(self.center)
            return c + self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        lo, hi = self.bounding_box()
        w, h = hi - lo
        per = 2 * (w + h)
        s = t * per
        out = np.empty(t.shape + (2,))
        leg1 = s < w
        leg2 = (s >= w) & (s < w + h)
        leg3 = (s >= w + h) & (s < 2 * w + h)
        leg4 = s >= 2 * w + h
        out[leg1] = np.stack([lo[0] + s[leg1], np.full(np.sum(leg1), lo[1])], axis=-1)
        out[leg2] = np.stack([np.full(np.sum(leg2), hi[0]), lo[1] + (s[leg2] - w)], axis=-1)
        out[leg3] = np.stack([hi[0] - (s[leg3] - w - h), np.full(np.sum(leg3), hi[1])], axis=-1)
        out[leg4] = np.stack([np.full(np.sum(leg4), lo[0]), hi[1] - (s[leg4] - 2 * w - h)], axis=-1)
        return out
