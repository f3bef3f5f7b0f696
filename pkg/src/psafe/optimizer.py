"""Gradient descent towards the level set ``P(tau >= T) = p``.

The objective is ``0.5 * (P(x) - p)^2`` whose gradient is
``(P(x) - p) * grad P(x)``.  Steps are taken with ADAM by default or with
plain gradient descent, optionally projected onto plane / half-space
constraints after every step.

The descent routine only needs an *estimator*: a callable
``estimator(x, seed) -> Estimate`` that also offers ``contains(x)``,
``margin(x)`` and ``dim``.  :class:`psafe.estimator.MonteCarloEstimator`
is the Monte Carlo one; :class:`psafe.oracles.AnalyticBm1d` is an exact
surrogate used for testing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from psafe.errors import ConfigurationError, PreconditionError
from psafe.estimator import Estimate, EstimateConfig, MonteCarloEstimator
from psafe.geometry import PlaneConstraint, Region, as_point, project_onto_constraints
from psafe.sde import SdeModel, SimConfig

__all__ = [
    "ProblemSpec",
    "AdamConfig",
    "GdConfig",
    "GdStatus",
    "StallClass",
    "GdResult",
    "Adam",
    "objective_gradient",
    "classify_stall",
    "descend",
    "find_boundary_point",
]


class Estimator(Protocol):
    dim: int

    def __call__(self, x, seed: Optional[int] = None) -> Estimate: ...

    def contains(self, x) -> bool: ...

    def margin(self, x) -> float: ...

    def boundary_distance(self, x) -> float: ...


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Target level ``p`` of the survival probability over horizon ``T``."""

    p: float
    T: float
    model: SdeModel
    region: Region

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ConfigurationError(f"p must lie in (0, 1), got {self.p}")
        if not self.T > 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")
        if self.model.dim != self.region.dim:
            raise ConfigurationError("model and region dimensions differ")


@dataclass(frozen=True)
class AdamConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class GdConfig:
    """Descent settings.

    ``stall_grad_tol`` is a multiple of the gradient standard error: a
    gradient whose norm is within that many standard errors of zero is
    treated as statistically zero.  A stall must persist for
    ``stall_patience`` consecutive iterates before the run stops.
    """

    lam: float = 5e-2
    max_iters: int = 50
    err_tol: float = 0.02
    adam: Optional[AdamConfig] = field(default_factory=AdamConfig)
    stall_grad_tol: float = 3.0
    stall_patience: int = 5

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigurationError(f"lambda must be positive, got {self.lam}")
        if not self.err_tol > 0:
            raise ConfigurationError(f"err_tol must be positive, got {self.err_tol}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be a positive integer, got {self.max_iters}")
        if self.stall_patience < 1:
            raise ConfigurationError("stall_patience must be at least 1")

    @property
    def use_adam(self) -> bool:
        return self.adam is not None

    def to_dict(self) -> dict:
        out = {
            "lambda": self.lam,
            "max_iters": self.max_iters,
            "err_tol": self.err_tol,
            "method": "adam" if self.use_adam else "gd",
            "stall_grad_tol": self.stall_grad_tol,
            "stall_patience": self.stall_patience,
        }
        if self.adam is not None:
            out.update(beta1=self.adam.beta1, beta2=self.adam.beta2, eps=self.adam.eps)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GdConfig":
        data = dict(data or {})
        method = data.pop("method", "adam")
        if method not in ("adam", "gd"):
            raise ConfigurationError(f"optimizer.method must be 'adam' or 'gd', got {method!r}")
        adam = None
        if method == "adam":
            adam = AdamConfig(
                float(data.pop("beta1", 0.9)), float(data.pop("beta2", 0.999)), float(data.pop("eps", 1e-8))
            )
        kwargs = {}
        if "lambda" in data:
            kwargs["lam"] = float(data.pop("lambda"))
        for key, conv in (("max_iters", int), ("err_tol", float), ("stall_grad_tol", float), ("stall_patience", int)):
            if key in data:
                kwargs[key] = conv(data.pop(key))
        if data:
            raise ConfigurationError(f"unknown optimizer keys: {sorted(data)}")
        return cls(adam=adam, **kwargs)


class GdStatus(str, enum.Enum):
    CONVERGED = "Converged"
    STALL_SUSPECTED = "StallSuspected"
    MAX_ITERS = "MaxIters"
    LEFT_REGION = "LeftRegion"


class StallClass(str, enum.Enum):
    ON_BOUNDARY = "OnBoundary"
    STALL_SUSPECTED = "StallSuspected"
    PROGRESSING = "Progressing"


@dataclass
class GdResult:
    x_star: np.ndarray
    estimate_at_x_star: Estimate
    status: GdStatus
    iterations: int
    trace: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is GdStatus.CONVERGED


class Adam:
    """ADAM moment estimates; :meth:`direction` returns the bias-corrected ratio."""

    def __init__(self, dim: int, cfg: AdamConfig):
        self.cfg = cfg
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.t = 0

    def direction(self, g: np.ndarray) -> np.ndarray:
        c = self.cfg
        self.t += 1
        self.m = c.beta1 * self.m + (1.0 - c.beta1) * g
        self.v = c.beta2 * self.v + (1.0 - c.beta2) * g * g
        m_hat = self.m / (1.0 - c.beta1**self.t)
        v_hat = self.v / (1.0 - c.beta2**self.t)
        return m_hat / (np.sqrt(v_hat) + c.eps)


def objective_gradient(est: Estimate, p: float) -> np.ndarray:
    return (est.p_hat - p) * np.asarray(est.grad, dtype=float)


def classify_stall(est: Estimate, p: float, cfg: GdConfig) -> StallClass:
    """Tell a boundary point from a flat spot where the objective is not zero."""
    gap = abs(est.p_hat - p)
    if gap < cfg.err_tol:
        return StallClass.ON_BOUNDARY
    grad_norm = float(np.linalg.norm(est.grad))
    noise = cfg.stall_grad_tol * float(np.linalg.norm(est.se_grad))
    if grad_norm <= noise + 1e-300:
        return StallClass.STALL_SUSPECTED
    return StallClass.PROGRESSING


def _tangent_projector(constraints: Sequence[PlaneConstraint], dim: int) -> np.ndarray:
    P = np.eye(dim)
    for c in constraints:
        if c.half_space_side is None:
            P = P - np.outer(c.normal, c.normal)
    return P


def descend(
    estimator: Estimator,
    x0,
    p: float,
    gd: GdConfig,
    constraints: Sequence[PlaneConstraint] = (),
    seed: int = 0,
) -> GdResult:
    """Run the descent from ``x0``; iteration ``j`` estimates with seed ``seed + j``."""
    constraints = [c for c in constraints if c is not None]
    x = project_onto_constraints(constraints, as_point(x0, estimator.dim))
    if not estimator.contains(x):
        raise PreconditionError("start point outside region")
    tangent = _tangent_projector(constraints, estimator.dim)
    adam = Adam(estimator.dim, gd.adam) if gd.use_adam else None
    trace = []
    stalled = 0
    j = 0
    while True:
        est = estimator(x, seed=seed + j)
        trace.append((x.copy(), est.p_hat))
        verdict = classify_stall(est, p, gd)
        if verdict is StallClass.ON_BOUNDARY:
            return GdResult(x, est, GdStatus.CONVERGED, j, trace)
        if j >= gd.max_iters:
            return GdResult(x, est, GdStatus.MAX_ITERS, j, trace)
        stalled = stalled + 1 if verdict is StallClass.STALL_SUSPECTED else 0
        if stalled >= gd.stall_patience:
            return GdResult(x, est, GdStatus.STALL_SUSPECTED, j, trace)

        g = tangent @ objective_gradient(est, p)
        step = adam.direction(g) if adam is not None else g
        x_new = project_onto_constraints(constraints, x - gd.lam * step)
        if not estimator.contains(x_new) or estimator.boundary_distance(x_new) < estimator.margin(x):
            return GdResult(x, est, GdStatus.LEFT_REGION, j, trace)
        x = x_new
        j += 1


def find_boundary_point(
    spec: ProblemSpec,
    x0,
    sim: SimConfig,
    est_cfg: EstimateConfig,
    gd: GdConfig,
    constraint: Optional[PlaneConstraint | Sequence[PlaneConstraint]] = None,
) -> GdResult:
    """Monte Carlo descent for ``spec`` starting at ``x0`` (seeds ``est_cfg.seed + j``)."""
    if sim.T != spec.T:
        raise ConfigurationError(f"simulation horizon {sim.T} differs from problem horizon {spec.T}")
    estimator = MonteCarloEstimator(spec.model, spec.region, sim, est_cfg)
    if constraint is None:
        constraints = ()
    elif isinstance(constraint, PlaneConstraint):
        constraints = (constraint,)
    else:
        constraints = tuple(constraint)
    return descend(estimator, x0, spec.p, gd, constraints, seed=est_cfg.seed)
