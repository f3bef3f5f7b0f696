"""Noise-free estimators with known level sets, for exercising the border code."""

from __future__ import annotations

import numpy as np

from psafe.estimator import Estimate
from psafe.geometry import BoxRegion, SphereRegion


def exact(p, grad) -> Estimate:
    grad = np.asarray(grad, dtype=float)
    return Estimate(float(p), grad, 0.0, np.zeros_like(grad), 0, 0, 0)


class Quadric:
    """``P(x) = 1 - |x|^2 / (2 R^2)`` inside a ball of radius ``2 R``; the 0.5 level is the sphere of radius ``R``."""

    def __init__(self, dim: int = 2, R: float = 1.0):
        self.dim = dim
        self.R = R
        self.region = SphereRegion(np.zeros(dim), 2.0 * R)
        self.calls = 0

    def __call__(self, x, seed=None):
        self.calls += 1
        x = np.asarray(x, dtype=float)
        return exact(1 - x @ x / (2 * self.R**2), -x / self.R**2)

    def contains(self, x):
        return bool(self.region.contains(x))

    def boundary_distance(self, x):
        return float(self.region._distance(np.asarray(x, dtype=float)))

    def margin(self, x):
        return 0.0

    def level_radius(self, p):
        return self.R * np.sqrt(2 * (1 - p))


class Slope:
    """``P(x, y) = 0.5 - 0.25 y`` on the square ``[-5, 5]^2``: the 0.5 level is the x axis."""

    dim = 2

    def __init__(self):
        self.region = BoxRegion(np.array([-5.0, -5.0]), np.array([5.0, 5.0]))

    def __call__(self, x, seed=None):
        x = np.asarray(x, dtype=float)
        return exact(0.5 - 0.25 * x[1], [0.0, -0.25])

    def contains(self, x):
        return bool(self.region.contains(x))

    def boundary_distance(self, x):
        return float(self.region._distance(np.asarray(x, dtype=float)))

    def margin(self, x):
        return 0.0


def ray_cast_contains(poly2d: np.ndarray, q) -> bool:
    """Even-odd rule; test-only consistency check of a closed polyline."""
    x, y = q
    inside = False
    n = len(poly2d)
    for i in range(n):
        x1, y1 = poly2d[i]
        x2, y2 = poly2d[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside
