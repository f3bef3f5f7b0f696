"""Closed-form and brute-force references used to check the Monte Carlo code.

Brownian motion started at ``x`` in ``(0, 1)`` survives up to ``T`` with
probability

    P(x, T) = sum_{m odd} 4/(m pi) sin(m pi x) exp(-m^2 pi^2 T / 2),

the Fourier solution of the heat equation with absorbing ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from psafe.errors import ConfigurationError
from psafe.estimator import BLOCK_PATHS, Estimate, EstimateConfig, derive_block_noise
from psafe.sde import SimConfig, simulate_batch

__all__ = [
    "bm_interval_survival",
    "bm_interval_survival_dx",
    "bm_interval_root",
    "AnalyticBm1d",
    "brute_force_boundary_distance",
    "bisect_level",
    "crn_finite_difference",
]


def _odd_modes(terms: int) -> np.ndarray:
    if terms < 1:
        raise ConfigurationError("terms must be at least 1")
    return np.arange(1, int(terms) + 1, 2, dtype=float)


def bm_interval_survival(x, T: float, terms: int = 99, scale: float = 1.0, length: float = 1.0):
    """``P(tau >= T)`` for ``scale * W`` started at ``x`` in ``(0, length)``."""
    m = _odd_modes(terms)
    u = np.asarray(x, dtype=float)[..., None] / length
    tau = scale * scale * T / (length * length)
    terms_ = 4.0 / (m * np.pi) * np.sin(m * np.pi * u) * np.exp(-(m * m) * np.pi**2 * tau / 2.0)
    return terms_.sum(axis=-1)


def bm_interval_survival_dx(x, T: float, terms: int = 99, scale: float = 1.0, length: float = 1.0):
    """Termwise ``x``-derivative of :func:`bm_interval_survival`."""
    m = _odd_modes(terms)
    u = np.asarray(x, dtype=float)[..., None] / length
    tau = scale * scale * T / (length * length)
    terms_ = 4.0 * np.cos(m * np.pi * u) * np.exp(-(m * m) * np.pi**2 * tau / 2.0)
    return terms_.sum(axis=-1) / length


def bm_interval_root(p: float, T: float, side: str = "left", terms: int = 99) -> float:
    """Point of ``(0, 1/2]`` (or ``[1/2, 1)``) where the series equals ``p``."""
    f = lambda x: bm_interval_survival(x, T, terms) - p  # noqa: E731
    if f(0.5) < 0:
        raise ValueError(f"level {p} is not reached at T={T}")
    if side == "left":
        return brentq(f, 1e-12, 0.5, xtol=1e-14)
    return brentq(f, 0.5, 1 - 1e-12, xtol=1e-14)


@dataclass(frozen=True)
class AnalyticBm1d:
    """Noise-free stand-in for the Monte Carlo estimator on ``(0, 1)``.

    Returns the series value and derivative with zero standard errors.
    """

    T: float
    terms: int = 99
    margin_width: float = 0.0
    dim: int = 1

    def __call__(self, x, seed: Optional[int] = None) -> Estimate:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = float(bm_interval_survival(x[0], self.T, self.terms))
        g = float(bm_interval_survival_dx(x[0], self.T, self.terms))
        return Estimate(p, np.array([g]), 0.0, np.zeros(1), 0, 0, 0, x=x)

    def contains(self, x) -> bool:
        return bool(0.0 < np.atleast_1d(x)[0] < 1.0)

    def boundary_distance(self, x) -> float:
        v = float(np.atleast_1d(x)[0])
        return min(v, 1.0 - v)

    def margin(self, x) -> float:
        return self.margin_width


def brute_force_boundary_distance(region, x, samples: int = 200_000, seed: int = 0) -> float:
    """Minimum distance from ``x`` to randomly sampled boundary points."""
    rng = np.random.default_rng(seed)
    pts = region.sample_boundary(samples, rng)
    return float(np.min(np.linalg.norm(pts - np.asarray(x, dtype=float), axis=1)))


def bisect_level(
    f: Callable[[float], float],
    level: float,
    lo: float,
    hi: float,
    tol: float = 1e-4,
    max_iter: int = 60,
) -> float:
    """Bisection for ``f(r) = level`` given ``f(lo) >= level >= f(hi)`` or the reverse.

    Works with noisy ``f`` as long as it is evaluated with common random
    numbers, which keeps it monotone in practice.
    """
    f_lo = f(lo) - level
    f_hi = f(hi) - level
    if f_lo * f_hi > 0:
        raise ValueError("level is not bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid) - level
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def crn_finite_difference(model, region, x, sim: SimConfig, cfg: EstimateConfig, axis: int, eps: float):
    """Central difference of the survival probability along ``axis`` with common random numbers.

    Both shifted starts reuse the estimator's noise blocks, so the standard
    error comes from the per-sample differences.  Returns ``(value, se)``.
    """
    x = np.asarray(x, dtype=float)
    e = np.zeros_like(x)
    e[axis] = eps
    diffs = []
    remaining = cfg.n_base
    block = 0
    while remaining > 0:
        count = min(BLOCK_PATHS, remaining)
        noise = derive_block_noise(cfg.seed, block, sim, model.dim)[:, :count, :]
        if cfg.antithetic:
            noise = np.concatenate([noise, -noise], axis=1)
        up, _ = simulate_batch(model, region, x + e, sim.h, noise)
        down, _ = simulate_batch(model, region, x - e, sim.h, noise)
        d = (up.astype(float) - down.astype(float)) / (2 * eps)
        if cfg.antithetic:
            d = 0.5 * (d[:count] + d[count:])
        diffs.append(d)
        remaining -= count
        block += 1
    d = np.concatenate(diffs)
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(d.size))
