"""Run configuration: a YAML key tree with normative key names.

Example::

    model: {name: toy3d, params: {rho: 0.5}}
    region: {type: sphere, center: [0, 0, 0], radius: 100}
    p: 0.5
    T: 1.0
    N: 10000
    n: 200
    seed: 0
    optimizer: {lambda: 0.05, max_iters: 50, err_tol: 0.02, method: adam}
    walk: {gamma: 1.5, step_min: 5, delta: 10}
    start: auto
    output_dir: out
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

from psafe.border import WalkConfig
from psafe.errors import ConfigurationError
from psafe.estimator import CLOCK_MODES, EstimateConfig
from psafe.geometry import Region, region_from_dict
from psafe.optimizer import GdConfig, ProblemSpec
from psafe.sde import SdeModel, SimConfig, model_from_dict

__all__ = ["RunConfig", "load_config", "dump_config"]

_TOP_KEYS = (
    "model",
    "region",
    "p",
    "T",
    "N",
    "n",
    "seed",
    "antithetic",
    "clock",
    "threads",
    "axis",
    "optimizer",
    "walk",
    "start",
    "output_dir",
)


def _number(data: dict, key: str, conv, required: bool = True, default=None):
    if key not in data or data[key] is None:
        if required:
            raise ConfigurationError(f"{key} is required")
        return default
    value = data[key]
    if isinstance(value, bool):
        raise ConfigurationError(f"{key} must be a number, got {value!r}")
    try:
        out = conv(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key} must be a number, got {value!r}") from None
    if conv is int and out != value:
        raise ConfigurationError(f"{key} must be an integer, got {value!r}")
    return out


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Everything one cli run needs, validated on construction."""

    model: dict
    region: dict
    p: float
    T: float
    N: int
    n: int
    seed: int = 0
    antithetic: bool = True
    clock: str = "normalized"
    threads: int = 1
    axis: Optional[int] = None
    optimizer: dict = field(default_factory=dict)
    walk: Optional[dict] = None
    start: Union[str, list] = "auto"
    output_dir: str = "out"

    def __post_init__(self):
        self.build_model()
        self.build_region()
        self.problem()
        self.sim()
        self.estimate_config()
        self.gd()
        if self.walk is not None:
            self.walk_config()
        if self.start != "auto":
            pt = np.asarray(self.start, dtype=float)
            if pt.ndim != 1 or pt.shape[0] != self.dim or not np.all(np.isfinite(pt)):
                raise ConfigurationError(f"start must be 'auto' or a finite point of dimension {self.dim}")
        if self.axis is not None and self.axis not in range(1, self.dim + 1):
            raise ConfigurationError(f"axis must be in 1..{self.dim}, got {self.axis}")

    # builders
    def build_model(self) -> SdeModel:
        return model_from_dict(self.model)

    def build_region(self) -> Region:
        return region_from_dict(self.region)

    @property
    def dim(self) -> int:
        return self.build_model().dim

    def problem(self) -> ProblemSpec:
        return ProblemSpec(self.p, self.T, self.build_model(), self.build_region())

    def sim(self) -> SimConfig:
        return SimConfig(self.T, self.n)

    def estimate_config(self) -> EstimateConfig:
        return EstimateConfig(self.N, self.seed, self.antithetic, self.threads, self.clock)

    def gd(self) -> GdConfig:
        return GdConfig.from_dict(self.optimizer)

    def walk_config(self) -> WalkConfig:
        if self.walk is None:
            raise ConfigurationError("walk section is required for this command")
        return WalkConfig.from_dict(self.walk)

    @property
    def plane_axis(self) -> int:
        """Section / walk-plane axis (1-based); defaults to the last coordinate."""
        return self.dim if self.axis is None else self.axis

    def start_point(self) -> Optional[np.ndarray]:
        return None if self.start == "auto" else np.asarray(self.start, dtype=float)

    def with_overrides(self, seed: Optional[int] = None, threads: Optional[int] = None, output_dir=None):
        kw = {}
        if seed is not None:
            kw["seed"] = int(seed)
        if threads is not None:
            kw["threads"] = int(threads)
        if output_dir is not None:
            kw["output_dir"] = str(output_dir)
        return replace(self, **kw) if kw else self

    # serialization
    @classmethod
    def from_dict(cls, data: Any) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("configuration must be a mapping")
        unknown = sorted(set(data) - set(_TOP_KEYS))
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {unknown}")
        for key in ("model", "region"):
            if not isinstance(data.get(key), dict):
                raise ConfigurationError(f"{key} is required and must be a mapping")
        clock = data.get("clock", "normalized")
        if clock not in CLOCK_MODES:
            raise ConfigurationError(f"clock must be one of {CLOCK_MODES}, got {clock!r}")
        antithetic = data.get("antithetic", True)
        if not isinstance(antithetic, bool):
            raise ConfigurationError("antithetic must be true or false")
        start = data.get("start", "auto")
        if start != "auto":
            if not isinstance(start, (list, tuple)):
                raise ConfigurationError("start must be 'auto' or a list of coordinates")
            start = [float(v) for v in start]
        optimizer = data.get("optimizer") or {}
        walk = data.get("walk")
        if not isinstance(optimizer, dict) or (walk is not None and not isinstance(walk, dict)):
            raise ConfigurationError("optimizer and walk must be mappings")
        return cls(
            model=_plain(data["model"]),
            region=_plain(data["region"]),
            p=_number(data, "p", float),
            T=_number(data, "T", float),
            N=_number(data, "N", int),
            n=_number(data, "n", int),
            seed=_number(data, "seed", int, False, 0),
            antithetic=antithetic,
            clock=clock,
            threads=_number(data, "threads", int, False, 1),
            axis=_number(data, "axis", int, False, None),
            optimizer=_plain(optimizer),
            walk=None if walk is None else _plain(walk),
            start=start,
            output_dir=str(data.get("output_dir", "out")),
        )

    def to_dict(self) -> dict:
        out = {
            "model": _plain(self.model),
            "region": _plain(self.region),
            "p": self.p,
            "T": self.T,
            "N": self.N,
            "n": self.n,
            "seed": self.seed,
            "antithetic": self.antithetic,
            "clock": self.clock,
            "threads": self.threads,
            "optimizer": _plain(self.optimizer),
            "start": self.start if self.start == "auto" else list(self.start),
            "output_dir": self.output_dir,
        }
        if self.axis is not None:
            out["axis"] = self.axis
        if self.walk is not None:
            out["walk"] = _plain(self.walk)
        return out


def _plain(obj):
    """Deep copy into plain python containers (YAML- and JSON-safe)."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from None
    return RunConfig.from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
