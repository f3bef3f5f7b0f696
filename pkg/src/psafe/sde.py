"""Autonomous SDE models and Euler-Maruyama simulation with Malliavin weights.

A path carries, besides its state ``X``, the first-variation matrix
``J = dX_t/dx``, the clock ``int dist(X_t, dA)^-2 dt`` and the weight vector
``H = int 1{t < tau1} dist^-2 (sigma^-1 J)^T dW``.  The survival indicator
times ``H`` is an unbiased sample of the gradient of ``P(tau >= T)``.

All kernels work on batches: ``X`` has shape ``(B, d)``, ``J`` has shape
``(B, d, d)``.  Rows never interact, so splitting a batch in any way
produces the same per-path numbers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from psafe.errors import ConfigurationError, EllipticityError, PreconditionError
from psafe.geometry import Region, as_point

__all__ = [
    "SdeModel",
    "SimConfig",
    "PathAccumulator",
    "PathOutcome",
    "DiffusionSolver",
    "builtin_toy3d",
    "builtin_bm",
    "model_from_dict",
    "em_step",
    "simulate_path",
    "simulate_batch",
]

BatchField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SdeModel:
    """``dX = mu(X) dt + sum_k sigma_k(X) dW^k``.

    Callables take a batch ``(B, d)`` and return:

    * ``drift``: ``(B, d)``
    * ``diffusion``: ``(B, d, d)`` whose column ``k`` is ``sigma_k``
    * ``drift_jacobian``: ``(B, d, d)`` with entry ``[i, j] = d mu_i / d x_j``
    * ``diffusion_jacobian``: ``(B, d, d, d)`` with entry
      ``[k, i, j] = d sigma_{ik} / d x_j``; ``None`` when every ``sigma_k``
      is constant.

    ``constant_diffusion`` may hold the fixed matrix so that it is
    factorized only once per simulation.
    """

    dim: int
    drift: BatchField
    diffusion: BatchField
    drift_jacobian: BatchField
    diffusion_jacobian: Optional[BatchField] = None
    constant_diffusion: Optional[np.ndarray] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("model dimension must be at least 1")
        if self.constant_diffusion is not None:
            sig = np.array(self.constant_diffusion, dtype=float)
            if sig.shape != (self.dim, self.dim):
                raise ConfigurationError("constant diffusion must be a d x d matrix")
            sig.setflags(write=False)
            object.__setattr__(self, "constant_diffusion", sig)

    # single-point conveniences
    def mu(self, x) -> np.ndarray:
        return self.drift(as_point(x, self.dim)[None])[0]

    def diffusion_matrix(self, x) -> np.ndarray:
        return self.diffusion(as_point(x, self.dim)[None])[0]

    def diffusion_column(self, x, k: int) -> np.ndarray:
        return self.diffusion_matrix(x)[:, k]

    def mu_jacobian(self, x) -> np.ndarray:
        return self.drift_jacobian(as_point(x, self.dim)[None])[0]

    def diffusion_column_jacobian(self, x, k: int) -> np.ndarray:
        if self.diffusion_jacobian is None:
            return np.zeros((self.dim, self.dim))
        return self.diffusion_jacobian(as_point(x, self.dim)[None])[0, k]

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


@dataclass(frozen=True)
class SimConfig:
    T: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ConfigurationError(f"T must be positive, got {self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return self.T / self.n


class DiffusionSolver:
    """Computes ``sigma(X)^-T dW`` row by row, caching constant factorizations.

    ``factorizations`` counts matrix factorizations performed so far (one
    per state for state-dependent diffusions, one in total otherwise).
    """

    def __init__(self, model: SdeModel):
        self.model = model
        self.factorizations = 0
        self._inv = None
        if model.constant_diffusion is not None:
            self._inv = self._factor_constant(model.constant_diffusion)

    def _factor_constant(self, sigma: np.ndarray) -> np.ndarray:
        self.factorizations += 1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(sigma, check_finite=True)
        if np.any(np.abs(np.diag(lu)) <= np.finfo(float).eps * np.abs(sigma).max()):
            raise EllipticityError("constant diffusion matrix is singular")
        return scipy.linalg.lu_solve((lu, piv), np.eye(sigma.shape[0]))

    def solve_transpose(self, x: np.ndarray, dW: np.ndarray) -> np.ndarray:
        """Rows ``y_b`` with ``sigma(x_b)^T y_b = dW_b``."""
        if self._inv is not None:
            return dW @ self._inv
        sig = self.model.diffusion(x)
        self.factorizations += x.shape[0]
        try:
            y = np.linalg.solve(np.swapaxes(sig, -1, -2), dW[..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise EllipticityError("diffusion matrix is singular at a visited state") from None
        if not np.all(np.isfinite(y)):
            raise EllipticityError("diffusion matrix is numerically singular at a visited state")
        return y


@dataclass
class PathAccumulator:
    """Per-path simulation state; every field has a leading batch axis."""

    t: float
    X: np.ndarray
    J: np.ndarray
    clock: np.ndarray
    H: np.ndarray
    alive: np.ndarray
    exit_step: np.ndarray
    step: int = 0

    @classmethod
    def start(cls, x0: np.ndarray) -> "PathAccumulator":
        X = np.array(x0, dtype=float, ndmin=2)
        B, d = X.shape
        return cls(
            t=0.0,
            X=X,
            J=np.broadcast_to(np.eye(d), (B, d, d)).copy(),
            clock=np.zeros(B),
            H=np.zeros((B, d)),
            alive=np.ones(B, dtype=bool),
            exit_step=np.full(B, -1, dtype=np.int64),
        )


@dataclass
class PathOutcome:
    survived: bool
    H: np.ndarray
    state: PathAccumulator


def _advance_state(model: SdeModel, X, dW, h):
    sig = model.constant_diffusion
    if sig is None:
        noise = np.einsum("bik,bk->bi", model.diffusion(X), dW)
    else:
        noise = dW @ sig.T
    return X + model.drift(X) * h + noise


def _advance_jacobian(model: SdeModel, X, J, dW, h):
    dJ = (model.drift_jacobian(X) @ J) * h
    if model.diffusion_jacobian is not None:
        dsig = model.diffusion_jacobian(X)  # (B, k, i, j)
        dJ = dJ + np.einsum("bkij,bjl,bk->bil", dsig, J, dW)
    return J + dJ


def em_step(
    model: SdeModel,
    state: PathAccumulator,
    dW: np.ndarray,
    h: float,
    region: Region,
    solver: Optional[DiffusionSolver] = None,
    full_jacobian: bool = True,
    clock_scale: float = 1.0,
) -> PathAccumulator:
    """Advance alive paths by one Euler step, updating ``J``, clock and ``H``.

    The weight uses left-endpoint values.  On the step where the clock
    crosses 1 only the fraction of the step below 1 contributes, so the
    weight integrates to exactly one before it is switched off.

    The clock runs at ``clock_scale / dist^2``; the default 1 is the plain
    inverse-square localization.

    With ``full_jacobian=False`` the first variation is only propagated while
    the clock is below 1 (``J`` is not needed afterwards).
    """
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    if solver is None:
        solver = DiffusionSolver(model)
    rows = np.flatnonzero(state.alive)
    if rows.size:
        X = state.X[rows]
        dist = region._distance(X)
        dist2 = dist * dist
        underflow = ~(dist2 > 0)
        weighting = (state.clock[rows] < 1.0) & ~underflow
        if np.any(weighting):
            w_rows = rows[weighting]
            rate = clock_scale / dist2[weighting]
            clock = state.clock[w_rows]
            inc = rate * h
            frac = np.where(clock + inc > 1.0, (1.0 - clock) / inc, 1.0)
            y = solver.solve_transpose(X[weighting], dW[w_rows])
            contrib = np.einsum("bji,bj->bi", state.J[w_rows], y)
            state.H[w_rows] += (frac * rate)[:, None] * contrib
            state.clock[w_rows] = clock + inc

        if full_jacobian:
            jac_rows = np.ones(rows.size, dtype=bool)
        else:
            jac_rows = state.clock[rows] < 1.0
        X_new = _advance_state(model, X, dW[rows], h)
        if np.any(jac_rows):
            jr = rows[jac_rows]
            state.J[jr] = _advance_jacobian(model, X[jac_rows], state.J[jr], dW[jr], h)
        state.X[rows] = X_new
        left = ~region._inside(X_new) | underflow | ~np.all(np.isfinite(X_new), axis=1)
        if np.any(left):
            gone = rows[left]
            state.alive[gone] = False
            state.exit_step[gone] = state.step + 1
    state.step += 1
    state.t = state.step * h
    return state


def simulate_path(
    model: SdeModel,
    region: Region,
    x0,
    cfg: SimConfig,
    noise,
    clock_scale: float = 1.0,
) -> PathOutcome:
    """Simulate one path from ``x0`` with caller-supplied increments ``(n, d)``."""
    x0 = as_point(x0, model.dim)
    if not region.contains(x0):
        raise PreconditionError("start point outside region")
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (cfg.n, model.dim):
        raise ConfigurationError(f"noise must have shape {(cfg.n, model.dim)}, got {noise.shape}")
    state = PathAccumulator.start(x0)
    solver = DiffusionSolver(model)
    for k in range(cfg.n):
        if not state.alive[0]:
            break
        em_step(model, state, noise[k][None], cfg.h, region, solver, clock_scale=clock_scale)
    return PathOutcome(bool(state.alive[0]), state.H[0].copy(), state)


def simulate_batch(
    model: SdeModel,
    region: Region,
    x0: np.ndarray,
    h: float,
    noise: np.ndarray,
    solver: Optional[DiffusionSolver] = None,
    clock_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Survival flags ``(B,)`` and weights ``(B, d)`` for noise of shape ``(n, B, d)``.

    Integration stops early once every path is dead; the first variation is
    dropped for paths whose clock has reached 1.
    """
    n, B, d = noise.shape
    state = PathAccumulator.start(np.broadcast_to(x0, (B, d)))
    if solver is None:
        solver = DiffusionSolver(model)
    for k in range(n):
        if not state.alive.any():
            break
        em_step(model, state, noise[k], h, region, solver, full_jacobian=False, clock_scale=clock_scale)
    return state.alive.copy(), state.H


def builtin_toy3d(rho: float) -> SdeModel:
    """Three-dimensional linear model with constant correlated noise."""
    rho = float(rho)
    if not (1.0 - rho > 0 and 1.0 + 2.0 * rho > 0):
        raise ConfigurationError(f"rho must lie in (-1/2, 1), got {rho}")
    w1, w2 = np.sqrt(1.0 - rho), np.sqrt(1.0 + 2.0 * rho)
    diag, off = 2.0 * w1 + w2, -w1 + w2
    sigma = np.array([[diag, off, off], [off, diag, off], [off, off, diag]]) / 3.0
    mu_jac = np.array([[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [1 / 3, 1 / 3, 1 / 3]])

    def drift(x):
        return x @ mu_jac.T

    def diffusion(x):
        return np.broadcast_to(sigma, (x.shape[0], 3, 3))

    def drift_jacobian(x):
        return np.broadcast_to(mu_jac, (x.shape[0], 3, 3))

    return SdeModel(
        dim=3,
        drift=drift,
        diffusion=diffusion,
        drift_jacobian=drift_jacobian,
        constant_diffusion=sigma,
        name="toy3d",
        params={"rho": rho},
    )


def builtin_bm(d: int, scale: float = 1.0) -> SdeModel:
    """Scaled Brownian motion in ``d`` dimensions."""
    if int(d) != d or d < 1:
        raise ConfigurationError(f"d must be a positive integer, got {d}")
    if not (np.isfinite(scale) and scale > 0):
        raise ConfigurationError(f"scale must be positive, got {scale}")
    d = int(d)
    sigma = float(scale) * np.eye(d)

    def drift(x):
        return np.zeros_like(x)

    def diffusion(x):
        return np.broadcast_to(sigma, (x.shape[0], d, d))

    def zero_jacobian(x):
        return np.zeros((x.shape[0], d, d))

    return SdeModel(
        dim=d,
        drift=drift,
        diffusion=diffusion,
        drift_jacobian=zero_jacobian,
        constant_diffusion=sigma,
        name="bm",
        params={"d": d, "scale": float(scale)},
    )


def model_from_dict(spec: dict) -> SdeModel:
    """Resolve ``{"name": ..., "params": {...}}`` to a built-in model."""
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigurationError("model.name is required")
    params = dict(spec.get("params") or {})
    name = spec["name"]
    try:
        if name == "toy3d":
            return builtin_toy3d(params.get("rho", 0.5))
        if name == "bm":
            return builtin_bm(params.get("d", 1), params.get("scale", 1.0))
    except TypeError as exc:
        raise ConfigurationError(f"model.params: {exc}") from None
    raise ConfigurationError(f"model.name {name!r} is not one of 'toy3d', 'bm'")
