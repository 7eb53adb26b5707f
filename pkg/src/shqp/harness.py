"""Experiment configuration, execution, and machine-readable output.

A run takes an ExperimentConfig (JSON document or keyword dict), executes
one algorithm on one problem, and writes a trace file plus a report JSON.
A sweep runs a grid of (tau, pbar, x0_seed) cells through a worker pool and
writes one summary row per cell.  Exit codes: 0 converged, 2 iteration
budget exhausted, 3 no further progress possible, 64 bad configuration.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import itertools
import json
import math
import os
import time

import jsonschema
import numpy as np

from . import diagnostics, gallery, polyhedra, solvers
from . import sets as sets_mod

__all__ = [
    "UsageError",
    "ExperimentConfig",
    "CONFIG_SCHEMA",
    "validate_config",
    "validate_experiment",
    "problem_from_config",
    "set_from_json",
    "resolve_x0",
    "run_experiment",
    "run_sweep",
    "build_report",
    "write_trace_csv",
    "write_trace_json",
    "EXIT_CONVERGED",
    "EXIT_MAX_ITERATIONS",
    "EXIT_NO_PROGRESS",
    "EXIT_USAGE",
]

EXIT_CONVERGED = 0
EXIT_MAX_ITERATIONS = 2
EXIT_NO_PROGRESS = 3
EXIT_USAGE = 64

_STATUS_EXIT = {
    "converged": EXIT_CONVERGED,
    "max-iterations": EXIT_MAX_ITERATIONS,
    "stalled": EXIT_NO_PROGRESS,
    "qp-infeasible-fallback-exhausted": EXIT_NO_PROGRESS,
}


class UsageError(ValueError):
    """Bad configuration, unknown name, or invalid parameter combination."""


_VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_SET_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"type": "string"}},
}

_PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["name", "sets", "start"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "sets": {"type": "array", "items": _SET_SCHEMA, "minItems": 1},
        "start": _VECTOR,
        "known_solution": {"oneOf": [_VECTOR, {"type": "null"}]},
        "intersection": {"oneOf": [_SET_SCHEMA, {"type": "null"}]},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["problem", "algorithm"],
    "additionalProperties": False,
    "properties": {
        "problem": {"oneOf": [{"type": "string", "minLength": 1}, _PROBLEM_SCHEMA]},
        "algorithm": {
            "enum": [
                "map",
                "basic-shqp",
                "mass",
                "memory-shqp",
                "two-shqp",
                "averaged",
                "global",
            ]
        },
        "x0": {"oneOf": [_VECTOR, {"type": "null"}]},
        "x0_seed": {"oneOf": [{"type": "integer", "minimum": 0}, {"type": "null"}]},
        "x0_radius": {"type": "number", "exclusiveMinimum": 0},
        "tau": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "tau_schedule": {
            "oneOf": [
                {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                    "minItems": 1,
                },
                {"type": "null"},
            ]
        },
        "pbar": {"type": "integer", "minimum": 0},
        "schedule": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["blocks", "farthest"]},
                        "blocks": {
                            "type": "array",
                            "items": {
                                "type": "array",
                                "items": {"type": "integer", "minimum": 0},
                                "minItems": 1,
                            },
                        },
                        "pairing": {"enum": ["latest", "fixed"]},
                    },
                },
                {"type": "null"},
            ]
        },
        "merit": {"enum": ["sum-of-squares", "max-distance", "intersection-distance"]},
        "seed": {"type": "integer", "minimum": 0},
        "max_iters": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "out_dir": {"oneOf": [{"type": "string"}, {"type": "null"}]},
        "format": {"enum": ["csv", "json"]},
        "sweep": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "tau": {"type": "array", "items": {"type": "number"}},
                        "pbar": {"type": "array", "items": {"type": "integer"}},
                        "x0_seeds": {"type": "array", "items": {"type": "integer"}},
                    },
                },
                {"type": "null"},
            ]
        },
    },
}


@dataclasses.dataclass
class ExperimentConfig:
    """One experiment: a problem, an algorithm, and solver parameters."""

    problem: object
    algorithm: str
    x0: list | None = None
    x0_seed: int | None = None
    x0_radius: float = 0.25
    tau: float = 0.1
    tau_schedule: list | None = None
    pbar: int = 8
    schedule: dict | None = None
    merit: str = "sum-of-squares"
    seed: int = 0
    max_iters: int = 500
    tol: float = 1e-10
    out_dir: str | None = None
    format: str = "csv"
    sweep: dict | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        validate_config(data)
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def solver_config(self) -> solvers.SolverConfig:
        schedule = None if self.tau_schedule is None else tuple(self.tau_schedule)
        return solvers.SolverConfig(
            tau=self.tau,
            tau_schedule=schedule,
            pbar=self.pbar,
            max_outer_iterations=self.max_iters,
            stop_tolerance=self.tol,
            rng_seed=self.seed,
        )


def validate_config(data: dict) -> None:
    """Validate a raw config dict against the schema; raise UsageError with
    the offending JSON path on failure."""
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        )
        raise UsageError(f"config invalid at {path}: {err.message}")


def _vec(obj, path, dimension=None):
    v = np.asarray(obj, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise UsageError(f"{path}: expected a flat nonempty vector")
    if dimension is not None and v.size != dimension:
        raise UsageError(f"{path}: expected {dimension} components, got {v.size}")
    return v


def _require(obj: dict, keys, path):
    for key in keys:
        if key not in obj:
            raise UsageError(f"{path}: missing required field {key!r}")
    known = set(keys) | {"kind"}
    extra = set(obj) - known
    if extra:
        raise UsageError(f"{path}: unknown field(s) {sorted(extra)}")


def set_from_json(obj: dict, path: str = "$.set") -> sets_mod.SetOracle:
    """Build a SetOracle from its JSON description.

    Smooth sets are named through a function registry ('polynomial-curve'
    with coefficients, 'power-cusp' with an exponent) since JSON cannot
    carry callables.
    """
    if not isinstance(obj, dict) or "kind" not in obj:
        raise UsageError(f"{path}: set description must be an object with a 'kind'")
    kind = obj["kind"]
    try:
        if kind == "halfspace":
            _require(obj, ["normal", "offset"], path)
            return sets_mod.HalfspaceSet(_vec(obj["normal"], f"{path}.normal"), float(obj["offset"]))
        if kind == "hyperplane":
            _require(obj, ["normal", "offset"], path)
            return sets_mod.HyperplaneSet(_vec(obj["normal"], f"{path}.normal"), float(obj["offset"]))
        if kind == "affine-subspace":
            _require(obj, ["point", "basis"], path)
            point = _vec(obj["point"], f"{path}.point")
            basis = [_vec(b, f"{path}.basis[{i}]", point.size) for i, b in enumerate(obj["basis"])]
            return sets_mod.AffineSubspace(point, basis)
        if kind == "ball":
            _require(obj, ["center", "radius"], path)
            return sets_mod.Ball(_vec(obj["center"], f"{path}.center"), float(obj["radius"]))
        if kind == "sphere":
            _require(obj, ["center", "radius"], path)
            return sets_mod.Sphere(_vec(obj["center"], f"{path}.center"), float(obj["radius"]))
        if kind == "box":
            _require(obj, ["lower", "upper"], path)
            lower = _vec(obj["lower"], f"{path}.lower")
            return sets_mod.Box(lower, _vec(obj["upper"], f"{path}.upper", lower.size))
        if kind == "point-set":
            _require(obj, ["points"], path)
            pts = [_vec(p, f"{path}.points[{i}]") for i, p in enumerate(obj["points"])]
            return sets_mod.PointSet(pts)
        if kind == "polyhedron":
            _require(obj, ["halfspaces"], path)
            halves = []
            for i, h in enumerate(obj["halfspaces"]):
                hpath = f"{path}.halfspaces[{i}]"
                if not isinstance(h, dict):
                    raise UsageError(f"{hpath}: expected an object")
                _require(h, ["normal", "offset"], hpath)
                halves.append(
                    polyhedra.Halfspace(
                        _vec(h["normal"], f"{hpath}.normal"),
                        float(h["offset"]),
                        kind=h.get("kind", "inequality"),
                    )
                )
            return sets_mod.PolyhedralSet(halves)
        if kind == "finite-union-of-convex":
            _require(obj, ["members"], path)
            members = [
                set_from_json(s, f"{path}.members[{i}]") for i, s in enumerate(obj["members"])
            ]
            return sets_mod.UnionOfConvex(members)
        if kind == "intersection":
            _require(obj, ["members"], path)
            members = [
                set_from_json(s, f"{path}.members[{i}]") for i, s in enumerate(obj["members"])
            ]
            return sets_mod.IntersectionSet(members)
        if kind == "fixed-rank-matrix-set":
            _require(obj, ["rows", "cols", "rank"], path)
            return sets_mod.FixedRankSet(int(obj["rows"]), int(obj["cols"]), int(obj["rank"]))
        if kind == "smooth-level-set":
            func = obj.get("function")
            if func == "polynomial-curve":
                _require(obj, ["function", "coefficients", "side", "convex"], path)
                return gallery.polynomial_level_set(
                    [float(c) for c in obj["coefficients"]],
                    obj["side"],
                    convex=bool(obj["convex"]),
                )
            if func == "power-cusp":
                _require(obj, ["function", "exponent"], path)
                return gallery.PowerCusp(float(obj["exponent"]))
            raise UsageError(
                f"{path}.function: unknown smooth-level-set function {func!r} "
                "(available: polynomial-curve, power-cusp)"
            )
        if kind == "smooth-manifold":
            func = obj.get("function")
            if func == "polynomial-curve":
                _require(obj, ["function", "coefficients"], path)
                return gallery.polynomial_curve([float(c) for c in obj["coefficients"]])
            raise UsageError(
                f"{path}.function: unknown smooth-manifold function {func!r} "
                "(available: polynomial-curve)"
            )
    except (ValueError, sets_mod.DimensionMismatchError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"{path}: {exc}") from exc
    raise UsageError(f"{path}.kind: unknown set kind {kind!r}")


def problem_from_config(problem_field) -> solvers.ProblemInstance:
    """Resolve a problem name (gallery) or inline JSON description."""
    if isinstance(problem_field, str):
        try:
            return gallery.get_entry(problem_field).problem
        except KeyError as exc:
            raise UsageError(str(exc).strip("'\"")) from exc
    spec = problem_field
    sets = [set_from_json(s, f"$.problem.sets[{i}]") for i, s in enumerate(spec["sets"])]
    start = _vec(spec["start"], "$.problem.start", sets[0].dimension)
    known = spec.get("known_solution")
    oracle = spec.get("intersection")
    try:
        return solvers.ProblemInstance(
            spec["name"],
            sets,
            start=start,
            known_solution=None if known is None else _vec(known, "$.problem.known_solution"),
            intersection_oracle=None
            if oracle is None
            else set_from_json(oracle, "$.problem.intersection"),
        )
    except (ValueError, sets_mod.DimensionMismatchError) as exc:
        raise UsageError(f"$.problem: {exc}") from exc


def resolve_x0(problem: solvers.ProblemInstance, cfg: ExperimentConfig):
    """Explicit vector wins; otherwise a seeded uniform draw from the ball
    around the known solution; otherwise the problem's stock start."""
    if cfg.x0 is not None:
        return _vec(cfg.x0, "$.x0", problem.dimension)
    if cfg.x0_seed is not None:
        if problem.known_solution is None:
            raise UsageError("x0_seed requires a problem with a known solution")
        rng = np.random.default_rng(cfg.x0_seed)
        direction = rng.standard_normal(problem.dimension)
        direction /= np.linalg.norm(direction)
        radius = cfg.x0_radius * rng.random() ** (1.0 / problem.dimension)
        return problem.known_solution + radius * direction
    return np.asarray(problem.start, dtype=float).copy()


def _check_algorithm(cfg: ExperimentConfig, problem: solvers.ProblemInstance) -> None:
    if cfg.algorithm not in solvers.SOLVERS:
        raise UsageError(
            f"unknown algorithm {cfg.algorithm!r}; available: {', '.join(sorted(solvers.SOLVERS))}"
        )
    if cfg.algorithm == "two-shqp" and len(problem.sets) != 2:
        raise UsageError("two-shqp requires exactly 2 sets")
    if cfg.algorithm == "memory-shqp" and cfg.pbar < 1:
        raise UsageError("memory-shqp requires pbar >= 1")
    if cfg.schedule is not None and cfg.algorithm != "basic-shqp":
        raise UsageError("schedule applies only to basic-shqp")


def _schedule_from_config(cfg: ExperimentConfig, set_count: int):
    if cfg.schedule is None:
        return None
    kind = cfg.schedule["kind"]
    blocks = tuple(tuple(int(i) for i in b) for b in cfg.schedule.get("blocks", ()))
    pairing = cfg.schedule.get("pairing", "latest")
    try:
        sched = solvers.Schedule(kind=kind, blocks=blocks, pairing=pairing)
        sched.validate_for(set_count)
    except ValueError as exc:
        raise UsageError(f"$.schedule: {exc}") from exc
    return sched


def validate_experiment(config) -> tuple[ExperimentConfig, solvers.ProblemInstance]:
    """Full pre-run validation: schema, problem resolution, algorithm
    compatibility, and solver parameter ranges.  Raises UsageError."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    problem = problem_from_config(cfg.problem)
    _check_algorithm(cfg, problem)
    if cfg.schedule is not None:
        _schedule_from_config(cfg, len(problem.sets))
    try:
        cfg.solver_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return cfg, problem


def _dispatch(cfg: ExperimentConfig, problem, x0) -> solvers.Trace:
    solver_cfg = cfg.solver_config()
    if cfg.algorithm == "basic-shqp":
        schedule = _schedule_from_config(cfg, len(problem.sets))
        return solvers.run_basic_shqp(problem, x0, schedule=schedule, config=solver_cfg)
    if cfg.algorithm == "global":
        return solvers.run_global(problem, x0, config=solver_cfg, merit=cfg.merit)
    runner = solvers.SOLVERS[cfg.algorithm]
    return runner(problem, x0, config=solver_cfg)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def build_report(cfg: ExperimentConfig, problem, trace: solvers.Trace, x0, wallclock_ms: float) -> dict:
    """Assemble the run report: config echo, terminal status, measured rates,
    sampled geometry constants, and the closed-form predictions."""
    echo = _jsonable(cfg.to_dict())
    echo["x0_resolved"] = _jsonable(np.asarray(x0, dtype=float))

    xbar = problem.known_solution
    if xbar is None and trace.status == "converged":
        xbar = trace.final_point()
    try:
        rate = _jsonable(dataclasses.asdict(diagnostics.analyze_trace(trace, xbar=xbar, pbar=cfg.pbar)))
    except diagnostics.InsufficientDataError as exc:
        rate = {"error": str(exc)}

    regularity: dict
    bounds: dict
    if xbar is None:
        regularity = {"error": "no-reference-point: run did not converge and the problem has no known solution"}
        bounds = {"error": "no-beta-estimate"}
    else:
        try:
            est = diagnostics.estimate_regularity(problem, xbar, rng_seed=cfg.seed)
            regularity = _jsonable(dataclasses.asdict(est))
            bounds = _jsonable(
                dataclasses.asdict(
                    diagnostics.predicted_bounds(len(problem.sets), est.beta_hat, cfg.tau)
                )
            )
        except (diagnostics.NoDistanceOracleError, ValueError) as exc:
            regularity = {"error": str(exc)}
            bounds = {"error": "no-beta-estimate"}

    return {
        "config_echo": echo,
        "terminal_status": trace.status,
        "rate_report": rate,
        "regularity_estimate": regularity,
        "predicted_bounds": bounds,
        "wallclock_ms": float(wallclock_ms),
    }


def write_trace_csv(trace: solvers.Trace, set_count: int, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["outer_i", "inner_j", "step_kind", "x"]
            + [f"dist_to_set_{l + 1}" for l in range(set_count)]
            + ["qp_active_size", "qp_kkt_residual"]
        )
        for rec in trace.records:
            writer.writerow(
                [
                    rec.outer_iteration,
                    rec.inner_step,
                    rec.step_kind,
                    ";".join(f"{v:.17g}" for v in rec.point),
                ]
                + [f"{d:.17g}" for d in rec.distances]
                + [rec.qp_active_size, f"{rec.qp_kkt_residual:.17g}"]
            )


def write_trace_json(trace: solvers.Trace, path: str) -> None:
    body = {
        "status": trace.status,
        "copy_steps": trace.copy_steps,
        "records": [
            {
                "outer_i": rec.outer_iteration,
                "inner_j": rec.inner_step,
                "step_kind": rec.step_kind,
                "x": _jsonable(rec.point),
                "distances": _jsonable(rec.distances),
                "qp_active_size": rec.qp_active_size,
                "qp_kkt_residual": rec.qp_kkt_residual,
            }
            for rec in trace.records
        ],
    }
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(config, out_dir: str | None = None) -> tuple[int, dict]:
    """Execute one configured run and write its output files.

    Returns (exit_code, outputs) where outputs maps 'trace' and 'report' to
    the written paths and carries the report dict under 'report_data'.
    """
    cfg, problem = validate_experiment(config)
    x0 = resolve_x0(problem, cfg)

    start_time = time.perf_counter()
    trace = _dispatch(cfg, problem, x0)
    wallclock_ms = (time.perf_counter() - start_time) * 1000.0

    report = build_report(cfg, problem, trace, x0, wallclock_ms)

    directory = out_dir or cfg.out_dir or "."
    os.makedirs(directory, exist_ok=True)
    if cfg.format == "csv":
        trace_path = os.path.join(directory, "trace.csv")
        write_trace_csv(trace, len(problem.sets), trace_path)
    else:
        trace_path = os.path.join(directory, "trace.json")
        write_trace_json(trace, trace_path)
    report_path = os.path.join(directory, "report.json")
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    exit_code = _STATUS_EXIT.get(trace.status, EXIT_NO_PROGRESS)
    return exit_code, {
        "trace": trace_path,
        "report": report_path,
        "report_data": report,
        "trace_data": trace,
    }


def _tail_geometric_mean(values) -> float | None:
    vals = [v for v in values if v > 0.0]
    if not vals:
        return None
    k = min(len(vals), max(4, math.ceil(0.25 * len(vals))))
    tail = np.asarray(vals[-k:], dtype=float)
    return float(np.exp(np.mean(np.log(tail))))


def _sweep_cell(cfg: ExperimentConfig, problem, tau, pbar, x0_seed, beta_hat):
    row = {
        "tau": tau,
        "pbar": pbar,
        "x0_seed": x0_seed,
        "status": "",
        "tail_qlinear_rate": None,
        "pbar_step_ratio": None,
        "predicted_contraction": None,
        "error": "",
    }
    try:
        cell_cfg = dataclasses.replace(cfg, tau=tau, pbar=pbar, x0_seed=x0_seed, x0=cfg.x0)
        x0 = resolve_x0(problem, cell_cfg)
        trace = _dispatch(cell_cfg, problem, x0)
        row["status"] = trace.status
        if beta_hat is not None:
            row["predicted_contraction"] = diagnostics.predicted_bounds(
                len(problem.sets), beta_hat, tau
            ).contraction
        rate = diagnostics.analyze_trace(trace, xbar=problem.known_solution, pbar=pbar)
        row["tail_qlinear_rate"] = rate.tail_qlinear_rate
        row["pbar_step_ratio"] = _tail_geometric_mean(rate.pbar_ratios)
    except diagnostics.InsufficientDataError as exc:
        row["error"] = str(exc)
    except Exception as exc:  # cell failures are recorded, the sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(config, out_dir: str | None = None) -> tuple[int, dict]:
    """Run a (tau, pbar, x0_seed) grid and write one summary row per cell.

    Cells execute in a thread pool; rows are collected and written in grid
    order by this single caller, so output is deterministic given seeds.
    """
    cfg, problem = validate_experiment(config)
    grid = cfg.sweep or {}
    taus = [float(t) for t in grid.get("tau", [cfg.tau])]
    pbars = [int(p) for p in grid.get("pbar", [cfg.pbar])]
    seeds = [int(s) for s in grid.get("x0_seeds", [cfg.x0_seed if cfg.x0_seed is not None else 0])]
    for name, axis in (("tau", taus), ("pbar", pbars), ("x0_seeds", seeds)):
        if not axis:
            raise UsageError(f"sweep grid axis {name!r} is empty")
    for t in taus:
        if not 0.0 <= t < 1.0:
            raise UsageError(f"sweep tau value {t} outside [0, 1)")

    beta_hat = None
    if problem.known_solution is not None:
        try:
            beta_hat = diagnostics.estimate_regularity(
                problem, problem.known_solution, rng_seed=cfg.seed
            ).beta_hat
        except (diagnostics.NoDistanceOracleError, ValueError):
            beta_hat = None

    cells = list(itertools.product(taus, pbars, seeds))
    workers = min(8, len(cells))
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_sweep_cell, cfg, problem, tau, pbar, seed, beta_hat)
            for tau, pbar, seed in cells
        ]
        rows = [f.result() for f in futures]

    directory = out_dir or cfg.out_dir or "."
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "sweep.csv")
    columns = [
        "tau",
        "pbar",
        "x0_seed",
        "status",
        "tail_qlinear_rate",
        "pbar_step_ratio",
        "predicted_contraction",
        "error",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [
                    "" if row[c] is None else (f"{row[c]:.17g}" if isinstance(row[c], float) else row[c])
                    for c in columns
                ]
            )
    return EXIT_CONVERGED, {"sweep": path, "rows": rows}
