"""Safe regions, boundary distances and planar constraints.

Regions accept a single point of shape ``(d,)`` or a batch of shape
``(..., d)``.  The public :func:`contains` / :func:`dist_to_boundary`
functions validate their input; the ``_distance`` method on each region is
the unchecked batched kernel used inside the path simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from psafe.errors import ConfigurationError, PreconditionError

__all__ = [
    "Region",
    "SphereRegion",
    "BoxRegion",
    "PlaneConstraint",
    "as_point",
    "contains",
    "dist_to_boundary",
    "project_onto_constraint",
    "project_onto_constraints",
    "region_from_dict",
]


def as_point(x, d: Optional[int] = None) -> np.ndarray:
    """Convert *x* to a finite float vector, optionally checking its dimension."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ConfigurationError(f"expected a point vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"point has non-finite coordinates: {arr}")
    if d is not None and arr.shape[0] != d:
        raise ConfigurationError(f"point has dimension {arr.shape[0]}, expected {d}")
    return arr


class Region:
    """Bounded safe set A.

    Subclasses implement ``_inside`` and ``_distance`` on arrays of shape
    ``(..., d)``.  Points on the boundary are *not* inside.
    """

    dim: int

    def _inside(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _distance(self, x: np.ndarray) -> np.ndarray:
        """Distance to the boundary for interior points (no validation)."""
        raise NotImplementedError

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ConfigurationError(
                f"point dimension {x.shape[-1] if x.ndim else 0} does not match region dimension {self.dim}"
            )
        return x

    def contains(self, x) -> bool | np.ndarray:
        x = self._check_dim(x)
        out = self._inside(x) & np.all(np.isfinite(x), axis=-1)
        return bool(out) if out.ndim == 0 else out

    def dist_to_boundary(self, x) -> float | np.ndarray:
        x = self._check_dim(x)
        if not np.all(self._inside(x)):
            raise PreconditionError("dist_to_boundary requires points strictly inside the region")
        out = self._distance(x)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def centroid(self) -> np.ndarray:
        raise NotImplementedError

    def extent(self, normal: np.ndarray) -> tuple[float, float]:
        """Range of ``normal . x`` over the closure of the region."""
        raise NotImplementedError

    def sample_boundary(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Random points on the boundary (used by distance oracles in tests)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class SphereRegion(Region):
    """Open ball ``{x : |x - center| < radius}``."""

    center: np.ndarray
    radius: float
    dim: int = field(init=False)

    def __post_init__(self):
        center = as_point(self.center)
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ConfigurationError(f"sphere radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "dim", center.shape[0])

    def _inside(self, x):
        return np.linalg.norm(x - self.center, axis=-1) < self.radius

    def _distance(self, x):
        return self.radius - np.linalg.norm(x - self.center, axis=-1)

    @property
    def centroid(self):
        return self.center.copy()

    def extent(self, normal):
        c = float(np.dot(normal, self.center))
        r = self.radius * float(np.linalg.norm(normal))
        return c - r, c + r

    def sample_boundary(self, count, rng):
        u = rng.standard_normal((count, self.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return self.center + self.radius * u

    def to_dict(self):
        return {"type": "sphere", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class BoxRegion(Region):
    """Open axis-aligned box ``lo < x < hi``."""

    lo: np.ndarray
    hi: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        lo, hi = as_point(self.lo), as_point(self.hi)
        if lo.shape != hi.shape:
            raise ConfigurationError("box corners have different dimensions")
        if not np.all(lo < hi):
            raise ConfigurationError("box requires lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "dim", lo.shape[0])

    def _inside(self, x):
        return np.all((x > self.lo) & (x < self.hi), axis=-1)

    def _distance(self, x):
        return np.minimum(x - self.lo, self.hi - x).min(axis=-1)

    @property
    def centroid(self):
        return 0.5 * (self.lo + self.hi)

    def extent(self, normal):
        normal = np.asarray(normal, dtype=float)
        lo_part = np.where(normal > 0, self.lo, self.hi) @ normal
        hi_part = np.where(normal > 0, self.hi, self.lo) @ normal
        return float(lo_part), float(hi_part)

    def sample_boundary(self, count, rng):
        pts = rng.uniform(self.lo, self.hi, size=(count, self.dim))
        axis = rng.integers(0, self.dim, size=count)
        side = rng.integers(0, 2, size=count).astype(bool)
        rows = np.arange(count)
        pts[rows, axis] = np.where(side, self.hi[axis], self.lo[axis])
        return pts

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


def contains(region: Region, x) -> bool:
    return region.contains(x)


def dist_to_boundary(region: Region, x) -> float:
    return region.dist_to_boundary(x)


def region_from_dict(spec: dict) -> Region:
    """Build a region from its configuration entry (``type`` plus parameters)."""
    try:
        kind = spec["type"]
    except (KeyError, TypeError):
        raise ConfigurationError("region.type is required") from None
    if kind == "sphere":
        if "radius" not in spec:
            raise ConfigurationError("region.radius is required for a sphere")
        center = spec.get("center")
        if center is None:
            d = spec.get("d")
            if d is None:
                raise ConfigurationError("region.center (or region.d) is required for a sphere")
            center = np.zeros(int(d))
        return SphereRegion(np.asarray(center, dtype=float), float(spec["radius"]))
    if kind == "box":
        if "lo" not in spec or "hi" not in spec:
            raise ConfigurationError("region.lo and region.hi are required for a box")
        return BoxRegion(np.asarray(spec["lo"], dtype=float), np.asarray(spec["hi"], dtype=float))
    raise ConfigurationError(f"region.type {kind!r} is not one of 'sphere', 'box'")


@dataclass(frozen=True, eq=False)
class PlaneConstraint:
    """Hyperplane ``normal . (x - point) = 0`` or the half-space on one side of it.

    With ``half_space_side`` unset the constraint is the plane itself.  With
    ``half_space_side = +1`` (or ``-1``) the feasible set is the closed
    half-space where ``side * normal . (x - point) >= 0``.
    """

    point_on_plane: np.ndarray
    normal: np.ndarray
    half_space_side: Optional[int] = None

    def __post_init__(self):
        p = as_point(self.point_on_plane)
        n = as_point(self.normal, p.shape[0])
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ConfigurationError("constraint normal must be nonzero")
        if self.half_space_side not in (None, 1, -1):
            raise ConfigurationError("half_space_side must be +1, -1 or None")
        object.__setattr__(self, "point_on_plane", p)
        object.__setattr__(self, "normal", n / norm)

    def signed_offset(self, x) -> float:
        return float(np.dot(self.normal, np.asarray(x, dtype=float) - self.point_on_plane))

    def is_feasible(self, x, tol: float = 0.0) -> bool:
        s = self.signed_offset(x)
        if self.half_space_side is None:
            return abs(s) <= tol
        return self.half_space_side * s >= -tol

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = self.signed_offset(x)
        if self.half_space_side is not None and self.half_space_side * s >= 0:
            return x.copy()
        return x - s * self.normal

    def to_dict(self) -> dict:
        return {
            "point_on_plane": self.point_on_plane.tolist(),
            "normal": self.normal.tolist(),
            "half_space_side": self.half_space_side,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlaneConstraint":
        return cls(
            np.asarray(data["point_on_plane"], dtype=float),
            np.asarray(data["normal"], dtype=float),
            data.get("half_space_side"),
        )


def project_onto_constraint(c: PlaneConstraint, x) -> np.ndarray:
    """Closest point of the constraint set to *x*."""
    return c.project(x)


def project_onto_constraints(constraints, x) -> np.ndarray:
    """Apply several constraints in order; planes first keeps half-spaces exact.

    Half-space normals used by the border walk lie inside the walk plane, so
    clipping them never breaks a preceding plane constraint.
    """
    x = np.asarray(x, dtype=float)
    ordered = sorted(constraints, key=lambda c: c.half_space_side is not None)
    for c in ordered:
        x = c.project(x)
    return x
