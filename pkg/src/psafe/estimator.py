"""Monte Carlo estimates of the survival probability and its gradient.

Brownian increments come from a counter-based Philox stream keyed by
``(seed, block)``; a block always holds :data:`BLOCK_PATHS` base paths, so
any path's noise is reproducible on its own and the split of work across
threads never changes a result.  Per-block sums are reduced in block order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from psafe.errors import ConfigurationError, PreconditionError
from psafe.geometry import Region, as_point
from psafe.sde import DiffusionSolver, SdeModel, SimConfig, simulate_batch

__all__ = [
    "BLOCK_PATHS",
    "EstimateConfig",
    "Estimate",
    "derive_path_noise",
    "derive_block_noise",
    "point_seed",
    "estimate",
    "estimate_along_sweep",
    "MonteCarloEstimator",
]

BLOCK_PATHS = 1024
_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
CLOCK_MODES = ("normalized", "unit")


@dataclass(frozen=True)
class EstimateConfig:
    """Path budget and randomness.

    ``N`` counts simulated paths; with ``antithetic`` the ``N/2`` base
    increments are each used together with their negation.  ``workers``
    only affects wall-clock time.

    ``clock`` selects the weight localization rate ``kappa / dist(X_t)^2``:
    ``"normalized"`` uses ``kappa = dist(x, dA)^2 / T`` (rate ``1/T`` at the
    start point), ``"unit"`` uses ``kappa = 1``.
    """

    N: int
    seed: int = 0
    antithetic: bool = True
    workers: int = 1
    clock: str = "normalized"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ConfigurationError(f"N must be an integer >= 2, got {self.N}")
        if self.antithetic and self.N % 2:
            raise ConfigurationError(f"N must be even with antithetic paths, got {self.N}")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if self.clock not in CLOCK_MODES:
            raise ConfigurationError(f"clock must be one of {CLOCK_MODES}, got {self.clock!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)

    @property
    def n_base(self) -> int:
        return self.N // 2 if self.antithetic else self.N

    def with_seed(self, seed: int) -> "EstimateConfig":
        return replace(self, seed=seed)

    def clock_scale(self, region: Region, x: np.ndarray, sim: SimConfig) -> float:
        if self.clock == "unit":
            return 1.0
        return float(region._distance(x)) ** 2 / sim.T


@dataclass(frozen=True)
class Estimate:
    """Survival probability, gradient and their standard errors at one point.

    ``n_eff`` is the number of i.i.d. samples behind the standard errors:
    antithetic pairs when pairing is on, paths otherwise.
    """

    p_hat: float
    grad: np.ndarray
    se_p: float
    se_grad: np.ndarray
    N: int
    n: int
    n_eff: int
    x: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "grad": np.asarray(self.grad).tolist(),
            "se_p": self.se_p,
            "se_grad": np.asarray(self.se_grad).tolist(),
            "N": self.N,
            "n": self.n,
            "n_eff": self.n_eff,
        }


def point_seed(seed: int, index: int) -> int:
    """Seed for the ``index``-th point of a sweep (index 0 keeps ``seed``)."""
    return (int(seed) ^ ((int(index) * _GOLDEN) & _MASK64)) & _MASK64


def derive_block_noise(seed: int, block: int, sim: SimConfig, d: int) -> np.ndarray:
    """Increments for base paths ``block*BLOCK_PATHS ...``, shape ``(n, BLOCK_PATHS, d)``."""
    key = (int(seed) & _MASK64) | (int(block) << 64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.standard_normal((sim.n, BLOCK_PATHS, d)) * np.sqrt(sim.h)


def derive_path_noise(seed: int, path_index: int, sim: SimConfig, d: int) -> np.ndarray:
    """Increments ``(n, d)`` of base path ``path_index``, each ``N(0, h I)``."""
    if path_index < 0:
        raise ConfigurationError("path_index must be nonnegative")
    block, offset = divmod(int(path_index), BLOCK_PATHS)
    return derive_block_noise(seed, block, sim, d)[:, offset, :].copy()


def _block_sums(model, region, x, sim, cfg, block, kappa):
    start = block * BLOCK_PATHS
    count = min(BLOCK_PATHS, cfg.n_base - start)
    noise = derive_block_noise(cfg.seed, block, sim, model.dim)[:, :count, :]
    solver = DiffusionSolver(model)
    if cfg.antithetic:
        noise = np.concatenate([noise, -noise], axis=1)
    alive, H = simulate_batch(model, region, x, sim.h, noise, solver, clock_scale=kappa)
    ind = alive.astype(float)
    g = ind[:, None] * H
    if cfg.antithetic:
        ind = 0.5 * (ind[:count] + ind[count:])
        g = 0.5 * (g[:count] + g[count:])
    return ind.sum(), (ind * ind).sum(), g.sum(axis=0), (g * g).sum(axis=0)


def _se(total, total_sq, m):
    if m < 2:
        return np.full_like(np.asarray(total, dtype=float), np.inf)
    var = (total_sq - total * total / m) / (m - 1)
    return np.sqrt(np.maximum(var, 0.0) / m)


def estimate(
    model: SdeModel,
    region: Region,
    x,
    sim: SimConfig,
    cfg: EstimateConfig,
) -> Estimate:
    """Estimate ``P(tau >= T)`` and its gradient at ``x``."""
    x = as_point(x, model.dim)
    if region.dim != model.dim:
        raise ConfigurationError("model and region dimensions differ")
    if not region.contains(x):
        raise PreconditionError("start point outside region")
    kappa = cfg.clock_scale(region, x, sim)
    blocks = range(-(-cfg.n_base // BLOCK_PATHS))
    if cfg.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda b: _block_sums(model, region, x, sim, cfg, b, kappa), blocks))
    else:
        parts = [_block_sums(model, region, x, sim, cfg, b, kappa) for b in blocks]

    s = ss = 0.0
    g = np.zeros(model.dim)
    gg = np.zeros(model.dim)
    for ps, pss, gs, gss in parts:
        s += ps
        ss += pss
        g = g + gs
        gg = gg + gss
    m = cfg.n_base
    return Estimate(
        p_hat=float(s / m),
        grad=g / m,
        se_p=float(_se(s, ss, m)),
        se_grad=_se(g, gg, m),
        N=cfg.N,
        n=sim.n,
        n_eff=m,
        x=x,
        seed=cfg.seed,
    )


def estimate_along_sweep(
    model: SdeModel,
    region: Region,
    points: Sequence,
    sim: SimConfig,
    cfg: EstimateConfig,
) -> list[Estimate]:
    """Independent estimates at several points; point ``i`` uses ``point_seed(seed, i)``."""
    pts = [as_point(p, model.dim) for p in points]
    for i, p in enumerate(pts):
        if not region.contains(p):
            raise PreconditionError(f"sweep point {i} is outside the region")
    if not pts:
        return []
    inner = replace(cfg, workers=1)

    def run(i):
        return estimate(model, region, pts[i], sim, inner.with_seed(point_seed(cfg.seed, i)))

    if cfg.workers > 1 and len(pts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(run, range(len(pts))))
    return [run(i) for i in range(len(pts))]


@dataclass(frozen=True, eq=False)
class MonteCarloEstimator:
    """Callable ``(x, seed) -> Estimate`` bound to one problem."""

    model: SdeModel
    region: Region
    sim: SimConfig
    cfg: EstimateConfig

    @property
    def dim(self) -> int:
        return self.model.dim

    def __call__(self, x, seed: Optional[int] = None) -> Estimate:
        cfg = self.cfg if seed is None else self.cfg.with_seed(seed)
        return estimate(self.model, self.region, x, self.sim, cfg)

    def contains(self, x) -> bool:
        return bool(self.region.contains(x))

    def boundary_distance(self, x) -> float:
        return float(self.region._distance(np.asarray(x, dtype=float)))

    def margin(self, x) -> float:
        """Typical one-step excursion ``|sigma(x)| sqrt(h)`` used to keep iterates off the boundary."""
        sig = self.model.diffusion_matrix(x)
        return float(np.linalg.norm(sig, 2) * np.sqrt(self.sim.h))
