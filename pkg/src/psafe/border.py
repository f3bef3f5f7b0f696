"""Tracing the level curve ``P(tau >= T) = p``.

A walk starts from one border point and repeatedly

1. picks a direction: the gradient rotated by 90 degrees inside the walk
   plane, blended with a parabola fitted through the last few border points;
2. steps ``gamma`` along it and re-lands on the border with a descent
   restricted to the half-plane ahead of the proposal;
3. when landing fails, shrinks the step and turns the half-plane towards
   the failed end point (:func:`adaptive_constraint`); past ``cap`` shrinks
   the walk is restarted from the other end of the polyline in the
   opposite orientation.

The walk closes once it comes back within ``closure_tol`` of its target
after more than ``step_min`` points.  Three-dimensional sets are explored
as a stack of planar sections (:func:`section_sweep_3d`).
"""

from __future__ import annotations

import enum
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from psafe.errors import ConfigurationError, PreconditionError
from psafe.estimator import Estimate, point_seed
from psafe.geometry import PlaneConstraint, Region, as_point
from psafe.optimizer import GdConfig, GdResult, GdStatus, descend

__all__ = [
    "WalkConfig",
    "BorderPoint",
    "BorderPolyline",
    "Containment",
    "DirectionInversion",
    "WalkFrame",
    "propose_direction",
    "walk_border_2d",
    "adaptive_constraint",
    "inside_check",
    "nearest_border_point",
    "radial_probe",
    "section_sweep_3d",
    "polyline_area",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WalkConfig:
    """Border-walk settings.

    ``closure_tol`` defaults to ``gamma``.  ``lam`` overrides the descent
    learning rate while re-landing on the border (the walk starts close to
    it, so a smaller rate than in the initial search is often preferable).
    """

    gamma: float
    step_min: int = 5
    closure_tol: Optional[float] = None
    parabola_window: int = 4
    max_points: int = 2000
    delta: Optional[float] = None
    cap: int = 8
    angle_tol_deg: float = 60.0
    lam: Optional[float] = None
    recheck: bool = True
    recheck_retries: int = 2

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if self.delta is not None and not self.delta > 0:
            raise ConfigurationError(f"delta must be positive, got {self.delta}")
        if self.parabola_window < 3:
            raise ConfigurationError("parabola_window must be at least 3")
        if self.step_min < 0 or self.max_points < 2 or self.cap < 1:
            raise ConfigurationError("step_min >= 0, max_points >= 2 and cap >= 1 are required")
        if self.closure_tol is not None and not self.closure_tol > 0:
            raise ConfigurationError("closure_tol must be positive")

    @property
    def closure(self) -> float:
        return self.gamma if self.closure_tol is None else self.closure_tol

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "step_min": self.step_min,
            "closure_tol": self.closure,
            "parabola_window": self.parabola_window,
            "max_points": self.max_points,
            "delta": self.delta,
            "cap": self.cap,
            "angle_tol_deg": self.angle_tol_deg,
            "lambda": self.lam,
            "recheck": self.recheck,
            "recheck_retries": self.recheck_retries,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WalkConfig":
        data = dict(data or {})
        if "gamma" not in data:
            raise ConfigurationError("walk.gamma is required")
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown walk keys: {unknown}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class BorderPoint:
    x: np.ndarray
    p_hat: float
    grad: np.ndarray
    index: int = 0
    section_id: Optional[int] = None
    se_p: float = 0.0
    se_grad: Optional[np.ndarray] = None

    @classmethod
    def from_estimate(cls, x, est: Estimate, index: int = 0, section_id: Optional[int] = None):
        return cls(
            np.asarray(x, dtype=float).copy(),
            float(est.p_hat),
            np.asarray(est.grad, dtype=float).copy(),
            index,
            section_id,
            float(est.se_p),
            np.asarray(est.se_grad, dtype=float).copy(),
        )


@dataclass
class BorderPolyline:
    """Ordered border points of one walk.

    ``status`` is one of ``closed``, ``open`` (walk ended without returning
    to its start), ``aborted`` (landing failed for good), ``tiny`` (closed
    after too few points to be trusted), ``empty`` (no border on the plane)
    or ``skipped`` (plane does not meet the region).
    """

    points: list
    closed: bool
    plane: Optional[PlaneConstraint] = None
    section_id: Optional[int] = None
    status: str = "open"
    diagnostics: dict = field(default_factory=dict)

    @property
    def coords(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 0))
        return np.array([pt.x for pt in self.points])

    def __len__(self) -> int:
        return len(self.points)


class Containment(str, enum.Enum):
    INSIDE = "Inside"
    UNKNOWN = "Unknown"


class DirectionInversion(Exception):
    """The adaptive constraint exhausted its shrink budget; the caller should turn around."""

    def __init__(self, attempts: list):
        super().__init__(f"no border point found after {len(attempts)} shrinks")
        self.attempts = attempts


class WalkFrame:
    """Orthonormal in-plane coordinates for a walk in 2D or on a plane in 3D."""

    def __init__(self, dim: int, plane: Optional[PlaneConstraint] = None):
        if plane is None:
            if dim != 2:
                raise ConfigurationError("a walk in dimension other than 2 needs a plane")
            self.basis = np.eye(2)
        else:
            if dim != 3 or plane.normal.shape[0] != 3:
                raise ConfigurationError("planar walks are supported in dimension 3 only")
            n = plane.normal
            cands = np.eye(3) - np.outer(n, n)
            order = np.argsort(-np.linalg.norm(cands, axis=1), kind="stable")[:2]
            u1 = cands[min(order)]
            u1 = u1 / np.linalg.norm(u1)
            u2 = cands[max(order)] - np.dot(cands[max(order)], u1) * u1
            u2 = u2 / np.linalg.norm(u2)
            self.basis = np.array([u1, u2])
        self.dim = dim
        self.plane = plane

    def to2(self, v) -> np.ndarray:
        return self.basis @ np.asarray(v, dtype=float)

    def from2(self, c) -> np.ndarray:
        return self.basis.T @ np.asarray(c, dtype=float)

    def tangent(self, v) -> np.ndarray:
        return self.from2(self.to2(v))


def _unit(v) -> Optional[np.ndarray]:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n < 1e-300:
        return None
    return v / n


def _parabola_forecast(pts2: np.ndarray) -> Optional[np.ndarray]:
    """Quadratic through ``pts2`` (last point = ``x_m``) extrapolated one step ahead.

    Both plane coordinates are fitted as quadratics of the cumulative chord
    length, which keeps the fit independent of how the curve is oriented,
    and evaluated one chord ``|x_m - x_{m-1}|`` past ``x_m``; for evenly
    spaced points this is the abscissa of ``2 x_m - x_{m-1}``.  Returns
    ``None`` when the points do not support a quadratic fit.
    """
    seg = np.linalg.norm(np.diff(pts2, axis=0), axis=1)
    if np.any(seg < 1e-12 * max(1.0, float(np.abs(pts2).max()))):
        return None
    s = np.concatenate([[0.0], np.cumsum(seg)])
    s_star = s[-1] + seg[-1]
    coef = np.polyfit(s / s[-1], pts2, 2)
    t = s_star / s[-1]
    return coef[0] * t * t + coef[1] * t + coef[2]


def _direction_parts(recent, grad, prev_dir, frame: WalkFrame, errors=None, gamma: float = 1.0, window: int = 4):
    """Blended direction plus its two ingredients, all as ambient unit vectors (or ``None``)."""
    g2 = frame.to2(grad)
    prev2 = None if prev_dir is None else _unit(frame.to2(prev_dir))

    perp2 = _unit(np.array([-g2[1], g2[0]]))
    if perp2 is not None and prev2 is not None and perp2 @ prev2 < 0:
        perp2 = -perp2

    par2 = None
    if len(recent) >= window:
        pts2 = np.array([frame.to2(pt.x if isinstance(pt, BorderPoint) else pt) for pt in recent[-window:]])
        forecast = _parabola_forecast(pts2)
        if forecast is not None:
            par2 = _unit(forecast - pts2[-1])

    if perp2 is None and par2 is None:
        if prev2 is None:
            return None, None, None
        return frame.from2(prev2), None, None
    if par2 is None:
        return frame.from2(perp2), frame.from2(perp2), None
    if perp2 is None:
        return frame.from2(par2), None, frame.from2(par2)

    e_grad, e_par = (0.0, 0.0) if errors is None else errors
    reg = gamma / 100.0
    w_grad = 1.0 / (reg + e_grad)
    w_par = 1.0 / (reg + e_par)
    blend = _unit(w_grad * perp2 + w_par * par2)
    if blend is None:
        blend = perp2
    return frame.from2(blend), frame.from2(perp2), frame.from2(par2)


def propose_direction(
    recent: Sequence,
    grad_at_last,
    prev_dir=None,
    plane: Optional[PlaneConstraint] = None,
    errors: Optional[tuple[float, float]] = None,
    gamma: float = 1.0,
    window: int = 4,
) -> np.ndarray:
    """Unit step direction from the last border point.

    ``errors`` holds the recent mean forecast errors of the perpendicular
    and parabola predictors; each predictor is weighted by
    ``1 / (gamma/100 + error)``.
    """
    if len(recent) < 1:
        raise PreconditionError("propose_direction needs at least one border point")
    grad = np.asarray(grad_at_last, dtype=float)
    frame = WalkFrame(grad.shape[0], plane)
    direction, _, _ = _direction_parts(list(recent), grad, prev_dir, frame, errors, gamma, window)
    if direction is None:
        raise PreconditionError("gradient vanishes in the walk plane and no previous direction is known")
    return direction


class _Seeds:
    def __init__(self, base: int):
        self.base = int(base)
        self.count = 0

    def next(self) -> int:
        self.count += 1
        return point_seed(self.base, self.count)


def _land(estimator, p, x_start, gd: GdConfig, constraints, seeds: _Seeds, cfg: WalkConfig, stats: dict):
    """Descend to the border and confirm with a fresh estimate.

    Returns ``(result, confirming_estimate)``; the estimate is ``None`` on failure.
    """
    res = descend(estimator, x_start, p, gd, constraints, seed=seeds.next())
    stats["gd_calls"] = stats.get("gd_calls", 0) + 1
    if not res.converged:
        return res, None
    if not cfg.recheck:
        return res, res.estimate_at_x_star
    for attempt in range(cfg.recheck_retries + 1):
        check = estimator(res.x_star, seed=seeds.next())
        if abs(check.p_hat - p) <= gd.err_tol:
            return res, check
        if attempt == cfg.recheck_retries:
            break
        res = descend(estimator, res.x_star, p, gd, constraints, seed=seeds.next())
        stats["gd_calls"] += 1
        if not res.converged:
            return res, None
    return replace(res, status=GdStatus.MAX_ITERS), None


def _walk_gd(gd: GdConfig, cfg: WalkConfig) -> GdConfig:
    return gd if cfg.lam is None else replace(gd, lam=cfg.lam)


def adaptive_constraint(
    estimator,
    p: float,
    x_m: BorderPoint,
    direction,
    failed: GdResult,
    cfg: WalkConfig,
    gd: GdConfig,
    plane: Optional[PlaneConstraint] = None,
    seed: int = 0,
    _seeds: Optional[_Seeds] = None,
    _stats: Optional[dict] = None,
):
    """Retry landing with shrinking steps ``gamma / (2 step)`` towards the last failed end point.

    Each round turns the search direction from ``x_m`` towards the point
    ``2 x_star - x_m`` (i.e. along ``x_star - x_m``), restarts the
    half-plane-constrained descent from ``x_m + gamma/(2 step) * dir`` and
    stops at the first confirmed border point.  Returns
    ``(GdResult, Estimate, attempts)`` where ``attempts`` records
    ``step``, ``distance`` and the start point of every round.  Raises
    :class:`DirectionInversion` after ``cfg.cap`` rounds.
    """
    seeds = _seeds if _seeds is not None else _Seeds(seed)
    stats = _stats if _stats is not None else {}
    frame = WalkFrame(len(x_m.x), plane)
    gd = _walk_gd(gd, cfg)
    x_star = np.asarray(failed.x_star, dtype=float)
    last_dir = _unit(frame.tangent(direction))
    attempts = []
    for step in range(1, cfg.cap + 1):
        target = 2.0 * x_star - x_m.x
        new_dir = _unit(frame.tangent(target - x_m.x))
        if new_dir is None:
            new_dir = last_dir
        last_dir = new_dir
        distance = cfg.gamma / (2.0 * step)
        x_bar = x_m.x + distance * new_dir
        record = {"step": step, "distance": distance, "x_bar": x_bar.copy(), "direction": new_dir.copy()}
        attempts.append(record)
        if not estimator.contains(x_bar):
            record["status"] = GdStatus.LEFT_REGION.value
            x_star = x_bar
            continue
        half = PlaneConstraint(x_bar, new_dir, +1)
        res, check = _land(estimator, p, x_bar, gd, [c for c in (plane, half) if c is not None], seeds, cfg, stats)
        record["status"] = res.status.value if check is None else "Confirmed"
        if check is not None and np.linalg.norm(res.x_star - x_m.x) <= 2.0 * cfg.gamma:
            return res, check, attempts
        x_star = np.asarray(res.x_star, dtype=float)
    raise DirectionInversion(attempts)


def _near_older(x, points, window: int, radius: float) -> bool:
    older = points[: max(len(points) - window, 0)]
    return any(np.linalg.norm(pt.x - x) < radius for pt in older)


def walk_border_2d(
    estimator,
    p: float,
    x_star,
    cfg: WalkConfig,
    gd: GdConfig,
    plane: Optional[PlaneConstraint] = None,
    seed: int = 0,
    section_id: Optional[int] = None,
) -> BorderPolyline:
    """Walk along the border from ``x_star`` until the curve closes.

    ``estimator`` is a callable ``(x, seed) -> Estimate`` with ``contains``,
    ``margin``, ``boundary_distance`` and ``dim`` (see
    :class:`psafe.estimator.MonteCarloEstimator`).  In three dimensions the
    walk stays on ``plane``.
    """
    dim = estimator.dim
    frame = WalkFrame(dim, plane)
    seeds = _Seeds(seed)
    wgd = _walk_gd(gd, cfg)
    stats = {"gd_calls": 0, "adaptive_rounds": [], "inversions": 0, "revisit_flips": 0}

    if isinstance(x_star, BorderPoint):
        first = replace(x_star, index=0, section_id=section_id)
    else:
        x0 = as_point(getattr(x_star, "x_star", x_star), dim)
        est = getattr(x_star, "estimate_at_x_star", None) or estimator(x0, seed=seeds.next())
        first = BorderPoint.from_estimate(x0, est, 0, section_id)
    if plane is not None and not plane.is_feasible(first.x, tol=1e-9 * max(1.0, np.abs(first.x).max())):
        raise PreconditionError("start point is not on the walk plane")
    if abs(first.p_hat - p) >= gd.err_tol:
        raise PreconditionError(f"start point is not on the border (p_hat={first.p_hat:.4f})")

    points = [first]
    target = first.x
    prev_dir = None
    inverted = False
    err_grad: deque = deque(maxlen=cfg.parabola_window)
    err_par: deque = deque(maxlen=cfg.parabola_window)
    window = cfg.parabola_window
    status = "open"
    closed = False

    def turn_around(fallback_dir):
        nonlocal inverted, target, prev_dir
        stats["inversions"] += 1
        if inverted:
            return False
        inverted = True
        points.reverse()
        target = points[0].x
        if len(points) >= 2:
            prev_dir = _unit(points[-1].x - points[-2].x)
        else:
            prev_dir = -fallback_dir
        err_grad.clear()
        err_par.clear()
        return True

    while len(points) < cfg.max_points:
        cur = points[-1]
        errors = (np.mean(err_grad) if err_grad else 0.0, np.mean(err_par) if err_par else 0.0)
        direction, perp, par = _direction_parts(points, cur.grad, prev_dir, frame, errors, cfg.gamma, window)
        if direction is None:
            status = "aborted"
            stats["reason"] = "no usable direction"
            break
        proposal = cur.x + cfg.gamma * direction
        may_close = len(points) > cfg.step_min
        # approaching the target is closure, not a revisit
        closing = may_close and np.linalg.norm(proposal - target) <= cfg.closure + cfg.gamma
        if not closing and _near_older(proposal, points, window, cfg.gamma / 2.0):
            stats["revisit_flips"] += 1
            direction = -direction
            perp = None if perp is None else -perp
            par = None
            proposal = cur.x + cfg.gamma * direction
            if _near_older(proposal, points, window, cfg.gamma / 2.0):
                if not turn_around(direction):
                    break
                continue

        result, check = None, None
        if estimator.contains(proposal):
            half = PlaneConstraint(proposal, direction, +1)
            result, check = _land(
                estimator, p, proposal, wgd, [c for c in (plane, half) if c is not None], seeds, cfg, stats
            )
            if check is not None and np.linalg.norm(result.x_star - cur.x) > 2.0 * cfg.gamma:
                check = None
        if check is None:
            failed = result or GdResult(proposal, None, GdStatus.LEFT_REGION, 0, [])
            try:
                result, check, attempts = adaptive_constraint(
                    estimator, p, cur, direction, failed, cfg, gd, plane, _seeds=seeds, _stats=stats
                )
                stats["adaptive_rounds"].append(len(attempts))
            except DirectionInversion as inv:
                stats["adaptive_rounds"].append(len(inv.attempts))
                if not turn_around(direction):
                    break
                continue

        new = BorderPoint.from_estimate(result.x_star, check, len(points), section_id)
        if perp is not None:
            err_grad.append(float(np.linalg.norm(cur.x + cfg.gamma * perp - new.x)))
        if par is not None:
            err_par.append(float(np.linalg.norm(cur.x + cfg.gamma * par - new.x)))
        step_dir = _unit(frame.tangent(new.x - cur.x))
        if step_dir is not None:
            prev_dir = step_dir
        points.append(new)
        if may_close and np.linalg.norm(new.x - target) <= cfg.closure:
            closed = True
            break

    if closed:
        status = "closed"
    elif status != "aborted" and len(points) >= cfg.max_points:
        status = "open"
        stats["reason"] = "max_points reached"
    elif status != "aborted":
        status = "aborted" if len(points) <= 1 else "open"
    for i, pt in enumerate(points):
        points[i] = replace(pt, index=i, section_id=section_id)
    stats["points"] = len(points)
    return BorderPolyline(points, closed, plane, section_id, status, stats)


def nearest_border_point(polyline: BorderPolyline, x) -> BorderPoint:
    pts = polyline.coords
    x = np.asarray(x, dtype=float)
    i = int(np.argmin(np.linalg.norm(pts - x, axis=1)))
    return polyline.points[i]


def inside_check(
    polyline: BorderPolyline,
    x,
    angle_tol_deg: float = 60.0,
    noise_factor: float = 3.0,
) -> Containment:
    """Classify ``x`` from the probability gradient at its nearest border point.

    ``x`` is inside when the direction from the nearest border point to
    ``x`` lies within ``angle_tol_deg`` of the direction in which the
    survival probability increases.  Nothing is concluded otherwise.
    """
    if not polyline.closed:
        raise PreconditionError("inside-check requires a closed border")
    x = np.asarray(x, dtype=float)
    nearest = nearest_border_point(polyline, x)
    offset = x - nearest.x
    dist = float(np.linalg.norm(offset))
    if dist == 0.0:
        return Containment.INSIDE
    grad = np.asarray(nearest.grad, dtype=float)
    gnorm = float(np.linalg.norm(grad))
    se = 0.0 if nearest.se_grad is None else float(np.linalg.norm(nearest.se_grad))
    if gnorm == 0.0 or gnorm <= noise_factor * se:
        return Containment.UNKNOWN
    cos = float(offset @ grad) / (dist * gnorm)
    if cos >= np.cos(np.deg2rad(angle_tol_deg)):
        return Containment.INSIDE
    return Containment.UNKNOWN


def radial_probe(
    estimator,
    origin,
    direction,
    target: float,
    tol: float = 0.05,
    max_fraction: float = 0.98,
    max_evals: int = 30,
    seed: int = 0,
) -> tuple[np.ndarray, Estimate]:
    """Point on the ray ``origin + t * direction`` where the estimate is near ``target``.

    Bisects on ``t`` between the origin and the region boundary using one
    fixed seed (common random numbers), stopping when ``|p_hat - target| <= tol``.
    """
    origin = np.asarray(origin, dtype=float)
    u = _unit(direction)
    if u is None:
        raise ConfigurationError("probe direction must be nonzero")
    if not estimator.contains(origin):
        raise PreconditionError("probe origin outside region")
    reach = estimator.boundary_distance(origin)
    t_hi = reach
    while estimator.contains(origin + t_hi * u):
        t_hi *= 2.0
    lo, hi = 0.0, t_hi * max_fraction
    while not estimator.contains(origin + hi * u) and hi > 0:
        hi *= max_fraction
    est_lo = estimator(origin, seed=seed)
    if abs(est_lo.p_hat - target) <= tol:
        return origin.copy(), est_lo
    best = (origin.copy(), est_lo)
    for _ in range(max_evals):
        mid = 0.5 * (lo + hi)
        x = origin + mid * u
        est = estimator(x, seed=seed)
        if abs(est.p_hat - target) < abs(best[1].p_hat - target):
            best = (x, est)
        if abs(est.p_hat - target) <= tol:
            return x, est
        if est.p_hat > target:
            lo = mid
        else:
            hi = mid
    return best


def polyline_area(polyline: BorderPolyline) -> float:
    """Shoelace area of the polyline in its walk-plane coordinates."""
    if len(polyline.points) < 3:
        return 0.0
    frame = WalkFrame(polyline.coords.shape[1], polyline.plane)
    pts = np.array([frame.to2(x) for x in polyline.coords])
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _axis_normal(axis, dim: int) -> np.ndarray:
    if isinstance(axis, (int, np.integer)):
        if not 1 <= axis <= dim:
            raise ConfigurationError(f"axis must be in 1..{dim}, got {axis}")
        n = np.zeros(dim)
        n[int(axis) - 1] = 1.0
        return n
    n = _unit(as_point(axis, dim))
    if n is None:
        raise ConfigurationError("axis vector must be nonzero")
    return n


def _section_seed_point(region: Region, plane: PlaneConstraint, neighbour: Optional[BorderPolyline], x_seed):
    if neighbour is not None and neighbour.points:
        target = plane.project(x_seed)
        projected = [plane.project(pt.x) for pt in neighbour.points]
        candidate = min(projected, key=lambda q: float(np.linalg.norm(q - target)))
        if region.contains(candidate):
            return candidate
    centre = region.centroid
    along = float(plane.normal @ (x_seed - centre))
    if abs(along) > 1e-300:
        t = float(plane.normal @ (plane.point_on_plane - centre)) / along
        if 0.0 <= t <= 1.0:
            candidate = centre + t * (x_seed - centre)
            if region.contains(candidate):
                return candidate
    candidate = plane.project(centre)
    if region.contains(candidate):
        return candidate
    return None


def section_sweep_3d(
    estimator,
    p: float,
    x_seed: BorderPoint,
    cfg: WalkConfig,
    gd: GdConfig,
    axis=3,
    region: Optional[Region] = None,
    seed: int = 0,
    workers: int = 1,
    max_sections: Optional[int] = None,
) -> list[BorderPolyline]:
    """Walk the sections ``axis . x = axis . x_seed + i * delta`` for ``i = 0, +-1, +-2, ...``.

    Each direction stops after its first plane without border points (or
    the first plane that misses the region).  Planes are seeded from the
    neighbouring section.  The returned list is ordered by plane offset and
    includes the empty / skipped planes with their status.
    """
    if cfg.delta is None:
        raise ConfigurationError("section sweeps need walk.delta")
    region = region if region is not None else estimator.region
    dim = estimator.dim
    if dim != 3:
        raise ConfigurationError("section sweeps are implemented for d = 3")
    normal = _axis_normal(axis, dim)
    lo, hi = region.extent(normal)
    c0 = float(normal @ x_seed.x)

    def plane_at(i):
        return PlaneConstraint(x_seed.x + i * cfg.delta * normal, normal)

    def walk_plane(i, neighbour):
        plane = plane_at(i)
        offset = c0 + i * cfg.delta
        sid = i
        pseed = point_seed(seed, 2 * abs(i) + (i < 0))
        if not lo < offset < hi:
            return BorderPolyline([], False, plane, sid, "skipped", {"gd_calls": 0})
        if i == 0:
            start = x_seed
        else:
            start_x = _section_seed_point(region, plane, neighbour, x_seed.x)
            if start_x is None:
                return BorderPolyline([], False, plane, sid, "skipped", {"gd_calls": 0})
            res = descend(estimator, start_x, p, gd, [plane], seed=pseed)
            if not res.converged:
                max_p = max(pv for _, pv in res.trace)
                status = "empty" if max_p < p else "unresolved"
                return BorderPolyline([], False, plane, sid, status, {"gd_calls": 1, "gd_status": res.status.value})
            start = BorderPoint.from_estimate(res.x_star, res.estimate_at_x_star, 0, sid)
        poly = walk_border_2d(estimator, p, start, cfg, gd, plane, seed=pseed, section_id=sid)
        if poly.closed and len(poly.points) <= cfg.step_min:
            poly.status = "tiny"
        return poly

    def sweep(sign):
        out = []
        neighbour = centre
        i = sign
        while max_sections is None or abs(i) <= max_sections:
            poly = walk_plane(i, neighbour)
            out.append(poly)
            if not poly.points:
                break
            neighbour = poly
            i += sign
        return out

    centre = walk_plane(0, None)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            up, down = pool.map(sweep, (1, -1))
    else:
        up, down = sweep(1), sweep(-1)
    return list(reversed(down)) + [centre] + up
