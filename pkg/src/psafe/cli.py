"""Command-line front end.

Subcommands: ``estimate``, ``walk``, ``sections``, ``check-inside``,
``oracle-bm1d``.  Exit codes:

    0  success
    2  invalid configuration or arguments
    3  precondition violated (e.g. start point outside the region)
    4  optimizer failed to reach the border from the start point
    5  malformed or unsuitable input file (e.g. open polyline for check-inside)
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from psafe import __version__
from psafe.border import (
    BorderPoint,
    BorderPolyline,
    inside_check,
    nearest_border_point,
    radial_probe,
    section_sweep_3d,
    walk_border_2d,
)
from psafe.config import RunConfig, load_config
from psafe.errors import ConfigurationError, EllipticityError, PreconditionError
from psafe.estimator import MonteCarloEstimator, point_seed
from psafe.geometry import PlaneConstraint
from psafe.optimizer import GdResult, descend
from psafe.oracles import bm_interval_survival, bm_interval_survival_dx

__all__ = ["main", "write_polyline_csv", "read_polyline_csv", "CliError"]

log = logging.getLogger("psafe")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_OPTIMIZER = 4
EXIT_INPUT = 5

# seed stream indices below the run seed
_SEED_DESCENT = 0
_SEED_WALK = 1
_SEED_PROBE = 2


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fmt(v: float) -> str:
    return repr(float(v))


def csv_header(dim: int) -> list[str]:
    return (
        ["section_id", "index"]
        + [f"x{i + 1}" for i in range(dim)]
        + ["p_hat", "se_p"]
        + [f"grad{i + 1}" for i in range(dim)]
    )


def write_polyline_csv(path, poly: BorderPolyline, dim: int) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# closed={'true' if poly.closed else 'false'} status={poly.status}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(dim))
        sid = "" if poly.section_id is None else str(poly.section_id)
        for pt in poly.points:
            writer.writerow([sid, pt.index, *map(_fmt, pt.x), _fmt(pt.p_hat), _fmt(pt.se_p), *map(_fmt, pt.grad)])


def read_polyline_csv(path) -> BorderPolyline:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read polyline {path}: {exc.strerror}") from None
    if not lines or not lines[0].startswith("#"):
        raise CliError(EXIT_INPUT, "polyline CSV lacks the '# closed=' header line")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    if meta.get("closed") not in ("true", "false"):
        raise CliError(EXIT_INPUT, "polyline CSV lacks the '# closed=' header line")
    rows = list(csv.reader(lines[1:]))
    if not rows:
        raise CliError(EXIT_INPUT, "polyline CSV has no header row")
    header = rows[0]
    dim = (len(header) - 4) // 2
    if dim < 1 or header != csv_header(dim):
        raise CliError(EXIT_INPUT, f"unexpected polyline columns: {header}")
    points = []
    try:
        for row in rows[1:]:
            vals = [float(v) for v in row[2:]]
            sid = int(row[0]) if row[0] else None
            points.append(
                BorderPoint(
                    np.array(vals[:dim]), vals[dim], np.array(vals[dim + 2 :]), int(row[1]), sid, vals[dim + 1], None
                )
            )
    except (ValueError, IndexError):
        raise CliError(EXIT_INPUT, "polyline CSV contains a malformed row") from None
    closed = meta["closed"] == "true"
    sid = points[0].section_id if points else None
    return BorderPolyline(points, closed, None, sid, meta.get("status", "closed" if closed else "open"))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, cfg: RunConfig, command: str, started: float, files: list[Path], extra: dict) -> dict:
    hashes = {f.name: _sha256(f) for f in files}
    combined = hashlib.sha256("".join(f"{k}:{v}\n" for k, v in sorted(hashes.items())).encode()).hexdigest()
    manifest = {
        "toolkit_version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "seeds": {
            "run": cfg.seed,
            "descent": point_seed(cfg.seed, _SEED_DESCENT),
            "walk": point_seed(cfg.seed, _SEED_WALK),
            "probe": point_seed(cfg.seed, _SEED_PROBE),
            "descent_iteration_rule": "seed + iteration",
        },
        "n_eff": "antithetic pairs (N/2)" if cfg.antithetic else "paths (N)",
        "threads": cfg.threads,
        "wall_clock_s": round(time.perf_counter() - started, 3),
        "outputs": hashes,
        "output_hash": combined,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=False) + "\n")
    return manifest


def _estimator(cfg: RunConfig) -> MonteCarloEstimator:
    return MonteCarloEstimator(cfg.build_model(), cfg.build_region(), cfg.sim(), cfg.estimate_config())


def _describe(res: GdResult) -> dict:
    return {
        "status": res.status.value,
        "iterations": res.iterations,
        "x_star": [float(v) for v in res.x_star],
        "p_hat": None if res.estimate_at_x_star is None else float(res.estimate_at_x_star.p_hat),
    }


def find_start(cfg: RunConfig, est: MonteCarloEstimator) -> tuple[GdResult, dict]:
    """Locate the seed border point for walks.

    An explicit ``start`` is descended from directly.  ``auto`` descends
    from the region centroid; if that stalls (typical when the centroid is
    deep inside the safe set, where the gradient vanishes) a radial probe
    along the first axis locates a point with probability about
    ``p + 0.6 (1 - p)`` and the descent is restarted there.
    """
    gd = cfg.gd()
    seed = point_seed(cfg.seed, _SEED_DESCENT)
    info: dict = {}
    start = cfg.start_point()
    if start is not None:
        if not est.contains(start):
            raise PreconditionError("start point outside region")
        res = descend(est, start, cfg.p, gd, seed=seed)
        info["start"] = [float(v) for v in start]
        return res, info
    centre = est.region.centroid
    res = descend(est, centre, cfg.p, gd, seed=seed)
    info["start"] = [float(v) for v in centre]
    if res.converged:
        return res, info
    info["centroid_descent"] = _describe(res)
    direction = np.zeros(est.dim)
    direction[0] = 1.0
    target = cfg.p + 0.6 * (1.0 - cfg.p)
    x0, e0 = radial_probe(est, centre, direction, target, seed=point_seed(cfg.seed, _SEED_PROBE))
    info["probe"] = {"x": [float(v) for v in x0], "p_hat": float(e0.p_hat), "target": target}
    info["start"] = [float(v) for v in x0]
    return descend(est, x0, cfg.p, gd, seed=seed), info


def _require_seed(res: GdResult) -> None:
    if not res.converged:
        hint = "; try a different start point" if res.status.value == "StallSuspected" else ""
        raise CliError(
            EXIT_OPTIMIZER,
            f"optimizer did not reach the border from the start point (status {res.status.value}){hint}",
        )


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_estimate(cfg: RunConfig, x: Sequence[float]) -> int:
    est = _estimator(cfg)
    point = np.asarray(x, dtype=float)
    if point.shape != (est.dim,):
        raise ConfigurationError(f"x must have {est.dim} coordinates, got {point.size}")
    if not est.contains(point):
        raise PreconditionError("start point outside region")
    e = est(point)
    grad = " ".join(f"{g:.6g}" for g in e.grad)
    se_grad = " ".join(f"{g:.3g}" for g in e.se_grad)
    print(f"p_hat = {e.p_hat:.6f} (se {e.se_p:.2g})")
    print(f"grad  = [{grad}] (se [{se_grad}])")
    print(f"N = {e.N}, n = {e.n}, n_eff = {e.n_eff}")
    print("JSON " + json.dumps({"x": point.tolist(), **e.to_dict()}))
    return EXIT_OK


def cmd_walk(cfg: RunConfig) -> int:
    started = time.perf_counter()
    wcfg = cfg.walk_config()
    est = _estimator(cfg)
    if est.dim not in (2, 3):
        raise ConfigurationError("walk supports d = 2 or d = 3")
    res, info = find_start(cfg, est)
    _require_seed(res)
    plane = None
    if est.dim == 3:
        normal = np.zeros(3)
        normal[cfg.plane_axis - 1] = 1.0
        plane = PlaneConstraint(res.x_star, normal)
    poly = walk_border_2d(est, cfg.p, res, wcfg, cfg.gd(), plane, seed=point_seed(cfg.seed, _SEED_WALK), section_id=0)
    out = _output_dir(cfg)
    path = out / "points.csv"
    write_polyline_csv(path, poly, est.dim)
    manifest = _write_manifest(
        out,
        cfg,
        "walk",
        started,
        [path],
        {
            "descent": _describe(res),
            "start_search": info,
            "point_counts": {path.name: len(poly)},
            "sections": [_section_entry(poly, path.name)],
        },
    )
    print(f"walk {poly.status}: {len(poly)} points -> {path}")
    print(f"output_hash {manifest['output_hash']}")
    return EXIT_OK


def _section_entry(poly: BorderPolyline, fname: Optional[str]) -> dict:
    diag = {k: v for k, v in poly.diagnostics.items() if isinstance(v, (int, float, str))}
    offset = None if poly.plane is None else float(poly.plane.normal @ poly.plane.point_on_plane)
    return {
        "section_id": poly.section_id,
        "plane_offset": offset,
        "status": poly.status,
        "closed": poly.closed,
        "points": len(poly),
        "file": fname,
        "diagnostics": diag,
    }


def cmd_sections(cfg: RunConfig) -> int:
    started = time.perf_counter()
    wcfg = cfg.walk_config()
    if wcfg.delta is None:
        raise ConfigurationError("walk.delta is required for sections")
    est = _estimator(cfg)
    if est.dim != 3:
        raise ConfigurationError("sections requires a d = 3 configuration")
    res, info = find_start(cfg, est)
    _require_seed(res)
    seed_pt = BorderPoint.from_estimate(res.x_star, res.estimate_at_x_star)
    polys = section_sweep_3d(
        est,
        cfg.p,
        seed_pt,
        wcfg,
        cfg.gd(),
        axis=cfg.plane_axis,
        region=est.region,
        seed=point_seed(cfg.seed, _SEED_WALK),
        workers=cfg.threads,
    )
    out = _output_dir(cfg)
    files, entries, counts = [], [], {}
    for poly in polys:
        fname = None
        if poly.points:
            fname = f"section_{poly.section_id:+04d}.csv"
            write_polyline_csv(out / fname, poly, 3)
            files.append(out / fname)
            counts[fname] = len(poly)
        entries.append(_section_entry(poly, fname))
    manifest = _write_manifest(
        out,
        cfg,
        "sections",
        started,
        files,
        {"descent": _describe(res), "start_search": info, "point_counts": counts, "sections": entries},
    )
    for e in entries:
        print(f"section {e['section_id']:+d}: {e['status']} ({e['points']} points)")
    print(f"output_hash {manifest['output_hash']}")
    return EXIT_OK


def cmd_check_inside(cfg: Optional[RunConfig], polyline_csv, x: Sequence[float]) -> int:
    poly = read_polyline_csv(polyline_csv)
    point = np.asarray(x, dtype=float)
    if not poly.points:
        raise CliError(EXIT_INPUT, "polyline has no points")
    dim = poly.points[0].x.shape[0]
    if point.shape != (dim,):
        raise ConfigurationError(f"x must have {dim} coordinates, got {point.size}")
    if cfg is not None and cfg.dim != dim:
        raise ConfigurationError(f"polyline dimension {dim} differs from the configured model ({cfg.dim})")
    if not poly.closed:
        raise CliError(EXIT_INPUT, "inside-check requires a closed border")
    verdict = inside_check(poly, point)
    near = nearest_border_point(poly, point)
    print(verdict.value)
    print(f"nearest border point: index {near.index}, x = [{' '.join(f'{v:.6g}' for v in near.x)}]")
    print(
        "JSON "
        + json.dumps({"result": verdict.value, "nearest_index": near.index, "nearest_x": near.x.tolist()})
    )
    return EXIT_OK


def cmd_oracle_bm1d(x: float, T: float, terms: int) -> int:
    if not 0.0 < x < 1.0:
        raise ConfigurationError(f"x must lie in (0, 1), got {x}")
    if T < 0:
        raise ConfigurationError(f"T must be nonnegative, got {T}")
    if terms < 1:
        raise ConfigurationError(f"terms must be at least 1, got {terms}")
    p = float(bm_interval_survival(x, T, terms))
    dp = float(bm_interval_survival_dx(x, T, terms))
    print(f"P     = {p:.12g}")
    print(f"dP/dx = {dp:.12g}")
    print("JSON " + json.dumps({"x": x, "T": T, "terms": terms, "p": p, "dp_dx": dp}))
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="psafe",
        description="Monte Carlo border tracing for p-safe regions of SDEs.",
        epilog="exit codes: 0 ok, 2 configuration, 3 precondition, 4 optimizer, 5 input shape",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"psafe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", parents=[common], help="survival probability and gradient at a point")
    p_est.add_argument("--x", type=float, nargs="+", required=True, help="point coordinates")
    sub.add_parser("walk", parents=[common], help="find a border point and walk the border")
    sub.add_parser("sections", parents=[common], help="walk parallel planar sections (d = 3)")
    p_in = sub.add_parser("check-inside", parents=[common], help="inside-check against a closed polyline")
    p_in.add_argument("--polyline", required=True, help="points CSV written by walk or sections")
    p_in.add_argument("--x", type=float, nargs="+", required=True)
    p_or = sub.add_parser("oracle-bm1d", parents=[common], help="series survival probability of BM on (0, 1)")
    p_or.add_argument("--x", type=float, required=True)
    p_or.add_argument("--T", type=float, required=True)
    p_or.add_argument("--terms", type=int, default=99)
    return parser


def _load(args, required: bool = True) -> Optional[RunConfig]:
    if args.config is None:
        if required:
            raise ConfigurationError("--config is required for this command")
        return None
    cfg = load_config(args.config)
    if args.threads is not None and args.threads < 1:
        raise ConfigurationError("threads must be at least 1")
    return cfg.with_overrides(seed=args.seed, threads=args.threads, output_dir=args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "oracle-bm1d":
            return cmd_oracle_bm1d(args.x, args.T, args.terms)
        if args.command == "check-inside":
            return cmd_check_inside(_load(args, required=False), args.polyline, args.x)
        cfg = _load(args)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.x)
        if args.command == "walk":
            return cmd_walk(cfg)
        if args.command == "sections":
            return cmd_sections(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionError, EllipticityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG
