"""Command-line entry point for design runs, oracles, sweeps, and benchmarks.

Commands
--------
design        surrogate SQP + sum-up rounding; writes design.csv, summary.json
oracle        dense-F SQP with exact derivatives (validation baseline)
gap-sweep     integrality gaps over problem sizes x node constants
bench         wall-time scaling of the surrogate pipeline over sizes
lidar-sanity  truncated-series reconstruction error per mode cutoff

Configuration is a flat key = value text file (``#`` comments allowed);
``--command`` and other flags override file entries.  Exit codes:
0 success, 2 invalid configuration, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path

import numpy as np

from .chebyshev import build_lowrank, node_budget
from .domains import (
    RectDomain,
    build_mesh,
    cubic_distance_kernel,
    dense_kernel_matrix,
    gaussian_difference_kernel,
    product_exponential_kernel,
)
from .exceptions import NonconvergenceError, NumericalFailure
from .lidar import LidarConfig, build_lidar_problem, fourier_coefficients_u0, reconstruct_u0
from .objective import BayesSetup, dense_objective_value
from .rounding import angular_plan, integrality_gap, natural_plan, sum_up_round
from .sqp import SqpConfig, solve_relaxed

__all__ = ["RunSpec", "main", "parse_config", "cmd_design", "cmd_oracle",
           "cmd_gap_sweep", "cmd_bench", "cmd_lidar_sanity"]

COMMANDS = ("design", "oracle", "gap-sweep", "bench", "lidar-sanity")

ANALYTIC_KERNELS = {
    "gauss": gaussian_difference_kernel,
    "expxy": product_exponential_kernel,
    "spline": cubic_distance_kernel,
}


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configuration."""


@dataclass
class RunSpec:
    """Everything one run needs; mirrors the config-file keys."""

    command: str = "design"
    problem: str = "lidar"
    criterion: str = "A"
    node_constant: float = 8.0
    seed: int = 0
    out: str = "."
    # analytic-kernel problems
    n: int = 100
    budget_fraction: float = 0.2
    alpha: float = 0.01
    sigma2_noise: float = 1.0
    # SQP
    epsilon: float = 1e-3
    max_outer: int = 200
    # dense-oracle limits
    oracle_cap: int = 2000
    gap_dense_max_n: int = 4000
    # bench
    bench_repeats: int = 3
    lidar: LidarConfig | None = None
    sizes: list = field(default_factory=list)
    constants: list = field(default_factory=list)

    def sqp_config(self, epsilon=None) -> SqpConfig:
        return SqpConfig(epsilon=self.epsilon if epsilon is None else epsilon,
                         max_outer=self.max_outer)


def parse_config(path) -> dict:
    """Flat ``key = value`` file into a string dict."""
    entries = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from err
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


_LIDAR_KEYS = {f.name for f in dataclass_fields(LidarConfig)}
_INT_KEYS = {"seed", "n", "max_outer", "oracle_cap", "gap_dense_max_n", "bench_repeats",
             "n_t", "p", "n_d", "n_r", "n_x"}
_FLOAT_KEYS = {"node_constant", "budget_fraction", "alpha", "sigma2_noise", "epsilon",
               "c1", "c2", "mu", "horizon", "r"}
_STR_KEYS = {"command", "problem", "criterion", "out"}


def build_runspec(entries: dict, overrides: dict) -> RunSpec:
    merged = dict(entries)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    spec = RunSpec()
    lidar_kwargs = {}
    for key, value in merged.items():
        if key in ("sizes", "constants"):
            setattr(spec, key, value if isinstance(value, list) else _parse_list(value))
            continue
        try:
            if key in _LIDAR_KEYS and key not in ("alpha", "sigma2_noise", "r"):
                lidar_kwargs[key] = int(value) if key in _INT_KEYS else float(value)
            elif key in _INT_KEYS:
                setattr(spec, key, int(value))
            elif key in _FLOAT_KEYS:
                setattr(spec, key, float(value))
            elif key in _STR_KEYS:
                setattr(spec, key, str(value))
            else:
                raise ConfigError(f"unknown configuration key: {key}")
        except (TypeError, ValueError) as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {value}") from err
    if spec.command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}")
    if spec.problem not in ("lidar", *ANALYTIC_KERNELS):
        raise ConfigError(f"problem must be lidar or one of {sorted(ANALYTIC_KERNELS)}")
    if spec.criterion not in ("A", "D"):
        raise ConfigError("criterion must be A or D")
    if spec.problem == "lidar":
        try:
            # alpha / sigma2_noise / r are shared keys: feed them to the
            # lidar config as well.
            lidar_kwargs.setdefault("alpha", spec.alpha)
            lidar_kwargs.setdefault("sigma2_noise", spec.sigma2_noise)
            if "r" in merged:
                lidar_kwargs["r"] = float(merged["r"])
            spec.lidar = LidarConfig(**lidar_kwargs)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad lidar configuration: {err}") from err
    elif lidar_kwargs:
        raise ConfigError("lidar keys supplied for a non-lidar problem")
    return spec


def _parse_list(text):
    items = [t for t in str(text).replace(",", " ").split() if t]
    out = []
    for item in items:
        out.append(float(item) if ("." in item or "e" in item.lower()) else int(item))
    return out


@dataclass
class _Assembled:
    lowrank: object
    setup: BayesSetup
    budget: float
    row_group: np.ndarray | None
    angles: np.ndarray | None
    dense_builder: object  # () -> dense F
    n_ambient: int


def _assemble(spec: RunSpec, size=None, constant=None) -> _Assembled:
    constant = spec.node_constant if constant is None else constant
    if spec.problem == "lidar":
        cfg = spec.lidar or LidarConfig()
        if size is not None:
            cfg = LidarConfig(**{**_lidar_dict(cfg), "n_d": size, "n_r": size, "n_x": size})
        prob = build_lidar_problem(cfg, constant, criterion=spec.criterion)
        return _Assembled(
            prob.lowrank,
            prob.setup,
            float(prob.budget),
            prob.row_group,
            prob.sector_angles,
            lambda: prob.dense_f,
            prob.lowrank.n_cols,
        )
    n = spec.n if size is None else size
    mesh = build_mesh(RectDomain((-1.0,), (1.0,)), n)
    kern = ANALYTIC_KERNELS[spec.problem]()
    budget = max(1.0, round(spec.budget_fraction * n))
    setup = BayesSetup(alpha=spec.alpha, sigma2_noise=spec.sigma2_noise, criterion=spec.criterion)
    lowrank = build_lowrank(kern, mesh, mesh, node_budget(constant, n))
    return _Assembled(
        lowrank, setup, budget, None, None,
        lambda: dense_kernel_matrix(kern, mesh, mesh), n,
    )


def _lidar_dict(cfg: LidarConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in dataclass_fields(LidarConfig)}


def _design_once(spec: RunSpec, assembled: _Assembled, epsilon=None):
    result = solve_relaxed(
        assembled.lowrank,
        assembled.setup,
        assembled.budget,
        spec.sqp_config(epsilon),
        row_group=assembled.row_group,
    )
    plan = (natural_plan(result.weights.n_weights) if assembled.angles is None
            else angular_plan(assembled.angles))
    w_int = sum_up_round(result.weights, plan)
    return result, w_int


def _write_design_csv(path, w_rel, w_int, angles):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["index"] + (["angle"] if angles is not None else []) + ["w_rel", "w_int"]
        writer.writerow(header)
        for i in range(w_rel.size):
            row = [i] + ([repr(float(angles[i]))] if angles is not None else [])
            row += [repr(float(w_rel[i])), repr(float(w_int[i]))]
            writer.writerow(row)


def _write_summary(out_dir, payload):
    with open(Path(out_dir) / "summary.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _summary_base(spec: RunSpec) -> dict:
    config = {k: v for k, v in vars(spec).items() if k not in ("lidar", "sizes", "constants")}
    if spec.lidar is not None:
        config["lidar"] = _lidar_dict(spec.lidar)
    if spec.sizes:
        config["sizes"] = list(spec.sizes)
    if spec.constants:
        config["constants"] = list(spec.constants)
    return {"command": spec.command, "config": config}


def cmd_design(spec: RunSpec) -> dict:
    out_dir = Path(spec.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    assembled = _assemble(spec)
    result, w_int = _design_once(spec, assembled)
    elapsed = time.perf_counter() - t0
    metrics = {
        "objective_surrogate_relaxed": float(result.objective_trace[-1]),
        "objective_surrogate_binary": None,
        "iterations": result.iterations,
        "sqp_status": result.status,
        "budget": assembled.budget,
        "sum_w_rel": float(result.weights.w.sum()),
        "sum_w_int": float(w_int.w.sum()),
    }
    gap = integrality_gap(assembled.lowrank, assembled.setup, result.weights, w_int)
    metrics["objective_surrogate_binary"] = metrics["objective_surrogate_relaxed"] + gap.surrogate
    metrics["gap_surrogate"] = gap.surrogate
    if assembled.n_ambient <= spec.gap_dense_max_n:
        f_dense = assembled.dense_builder()
        metrics["objective_dense_relaxed"] = dense_objective_value(
            f_dense, result.weights, assembled.setup
        )
        metrics["objective_dense_binary"] = dense_objective_value(f_dense, w_int, assembled.setup)
    _write_design_csv(out_dir / "design.csv", result.weights.w, w_int.w, assembled.angles)
    payload = _summary_base(spec)
    payload.update({"metrics": metrics, "timings": {"wall_seconds": elapsed}, "status": "ok"})
    _write_summary(out_dir, payload)
    return payload


def cmd_oracle(spec: RunSpec) -> dict:
    out_dir = Path(spec.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    assembled = _assemble(spec)
    f_dense = assembled.dense_builder()
    if max(f_dense.shape) > spec.oracle_cap:
        raise ConfigError(
            f"oracle refuses problems beyond {spec.oracle_cap} rows/cols "
            f"(got {f_dense.shape})"
        )
    t0 = time.perf_counter()
    result = solve_relaxed(
        f_dense,
        assembled.setup,
        assembled.budget,
        SqpConfig(epsilon=1e-8, max_outer=spec.max_outer),
        row_group=assembled.row_group,
    )
    elapsed = time.perf_counter() - t0
    plan = (natural_plan(result.weights.n_weights) if assembled.angles is None
            else angular_plan(assembled.angles))
    w_int = sum_up_round(result.weights, plan)
    _write_design_csv(out_dir / "oracle.csv", result.weights.w, w_int.w, assembled.angles)
    payload = _summary_base(spec)
    payload.update(
        {
            "metrics": {
                "objective_dense_relaxed": float(result.objective_trace[-1]),
                "objective_dense_binary": dense_objective_value(f_dense, w_int, assembled.setup),
                "iterations": result.iterations,
                "sqp_status": result.status,
            },
            "timings": {"wall_seconds": elapsed},
            "status": "ok",
        }
    )
    _write_summary(out_dir, payload)
    return payload


def cmd_gap_sweep(spec: RunSpec) -> dict:
    out_dir = Path(spec.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sizes = [int(s) for s in (spec.sizes or [spec.n])]
    if sorted(sizes) != sizes:
        raise ConfigError("sizes must be ascending")
    constants = [float(c) for c in (spec.constants or [spec.node_constant])]
    rows = []
    for n in sizes:
        for c in constants:
            started = time.perf_counter()
            try:
                assembled = _assemble(spec, size=n, constant=c)
                result, w_int = _design_once(spec, assembled)
                dense_f = None
                if assembled.n_ambient <= spec.gap_dense_max_n:
                    dense_f = assembled.dense_builder()
                gap = integrality_gap(
                    assembled.lowrank, assembled.setup, result.weights, w_int, dense_f=dense_f
                )
                rows.append([n, c, gap.surrogate,
                             "" if gap.dense is None else gap.dense,
                             time.perf_counter() - started, "ok"])
            except (NonconvergenceError, NumericalFailure, ValueError) as err:
                rows.append([n, c, "", "", time.perf_counter() - started, f"error: {err}"])
    with open(out_dir / "gap_sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "c", "gap_surrogate", "gap_dense", "time_seconds", "status"])
        writer.writerows(rows)
    payload = _summary_base(spec)
    payload.update(
        {
            "metrics": {"cells": len(rows),
                        "failures": sum(1 for r in rows if str(r[-1]).startswith("error"))},
            "timings": {"wall_seconds": sum(float(r[4]) for r in rows)},
            "status": "ok",
        }
    )
    _write_summary(out_dir, payload)
    return payload


def cmd_bench(spec: RunSpec) -> dict:
    out_dir = Path(spec.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sizes = [int(s) for s in (spec.sizes or [spec.n])]
    rows = []
    for n in sizes:
        times = []
        iters = 0
        for _ in range(max(1, spec.bench_repeats)):
            t0 = time.perf_counter()
            assembled = _assemble(spec, size=n)
            result, _ = _design_once(spec, assembled)
            times.append(time.perf_counter() - t0)
            iters = result.iterations
        rows.append([n, float(np.median(times)), min(times), max(times), iters])
    with open(out_dir / "bench.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "median_seconds", "min_seconds", "max_seconds", "iterations"])
        writer.writerows(rows)
    payload = _summary_base(spec)
    payload.update(
        {
            "metrics": {"sizes": sizes, "median_seconds": [r[1] for r in rows]},
            "timings": {"wall_seconds": sum(r[1] for r in rows)},
            "status": "ok",
        }
    )
    _write_summary(out_dir, payload)
    return payload


def cmd_lidar_sanity(spec: RunSpec) -> dict:
    out_dir = Path(spec.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    orders = [int(p) for p in (spec.sizes or [1, 2, 3, 5])]

    def u0(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    xs = np.linspace(-1.0, 1.0, 81)
    grid_x, grid_y = np.meshgrid(xs, xs, indexing="ij")
    reference = u0(grid_x, grid_y)
    ref_norm = float(np.linalg.norm(reference))
    rows = []
    for p in orders:
        coeffs = fourier_coefficients_u0(u0, p)
        recon = reconstruct_u0(coeffs, grid_x, grid_y)
        rows.append([p, float(np.linalg.norm(recon - reference)) / ref_norm])
    with open(out_dir / "sanity.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "relative_l2_error"])
        writer.writerows(rows)
    payload = _summary_base(spec)
    payload.update(
        {
            "metrics": {str(p): err for p, err in rows},
            "timings": {"wall_seconds": 0.0},
            "status": "ok",
        }
    )
    _write_summary(out_dir, payload)
    return payload


_DISPATCH = {
    "design": cmd_design,
    "oracle": cmd_oracle,
    "gap-sweep": cmd_gap_sweep,
    "bench": cmd_bench,
    "lidar-sanity": cmd_lidar_sanity,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sensorplace", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--command", choices=COMMANDS)
    parser.add_argument("--sizes", help="comma/space separated problem sizes (or p list)")
    parser.add_argument("--constants", help="comma/space separated node constants")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    args = parser.parse_args(argv)

    try:
        entries = parse_config(args.config) if args.config else {}
        overrides = {
            "command": args.command,
            "seed": args.seed,
            "out": args.out,
            "sizes": _parse_list(args.sizes) if args.sizes else None,
            "constants": _parse_list(args.constants) if args.constants else None,
        }
        spec = build_runspec(entries, overrides)
    except ConfigError as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return 2

    np.random.seed(spec.seed)  # pipeline is deterministic; seed recorded for sweeps
    try:
        _DISPATCH[spec.command](spec)
    except ConfigError as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return 2
    except (NonconvergenceError, NumericalFailure) as err:
        payload = _summary_base(spec)
        payload.update({"metrics": {}, "timings": {}, "status": "error", "error": str(err)})
        try:
            Path(spec.out).mkdir(parents=True, exist_ok=True)
            _write_summary(spec.out, payload)
        except OSError:
            pass
        print(f"solver failure: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
