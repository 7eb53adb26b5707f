"""Feasibility solvers for intersections of closed sets.

Projection oracles for common sets, supporting-halfspace accumulation, a
dual active-set QP for polyhedral projection, several intersection solvers
built on those pieces, and diagnostics that measure convergence rates and
sampled regularity constants.
"""

from .diagnostics import (
    InsufficientDataError,
    NoDistanceOracleError,
    PredictedBounds,
    RateReport,
    RegularityEstimate,
    analyze_trace,
    estimate_regularity,
    predicted_bounds,
)
from .gallery import GalleryEntry, gallery_entries, gallery_names, get_entry
from .harness import ExperimentConfig, UsageError, run_experiment, run_sweep
from .polyhedra import (
    Halfspace,
    InfeasiblePolyhedronError,
    NoSeparationError,
    Polyhedron,
    QPResult,
    ZeroGapError,
    derived_halfspace,
    eta,
    halfspace_from_projection,
    project_onto_polyhedron,
    relaxed_point,
)
from .sets import (
    AffineSubspace,
    Ball,
    Box,
    DegenerateNormalError,
    DimensionMismatchError,
    FixedRankSet,
    HalfspaceSet,
    HyperplaneSet,
    InsufficientSamplesError,
    IntersectionSet,
    LevelSet,
    ManifoldCurve,
    PointSet,
    PolyhedralSet,
    ProjectionNotConvergedError,
    SetOracle,
    Sphere,
    UnionOfConvex,
    check_sosh,
    check_super_regular,
    normal_at,
    project,
)
from .solvers import (
    ProblemInstance,
    Schedule,
    SolverConfig,
    Trace,
    TraceRecord,
    merit_value,
    run_averaged_projections,
    run_basic_shqp,
    run_global,
    run_map,
    run_mass_projection,
    run_memory_shqp,
    run_two_shqp,
)

__version__ = "0.1.0"

__all__ = [
    "AffineSubspace",
    "Ball",
    "Box",
    "DegenerateNormalError",
    "DimensionMismatchError",
    "ExperimentConfig",
    "FixedRankSet",
    "GalleryEntry",
    "Halfspace",
    "HalfspaceSet",
    "HyperplaneSet",
    "InfeasiblePolyhedronError",
    "InsufficientDataError",
    "InsufficientSamplesError",
    "IntersectionSet",
    "LevelSet",
    "ManifoldCurve",
    "NoDistanceOracleError",
    "NoSeparationError",
    "PointSet",
    "PolyhedralSet",
    "Polyhedron",
    "PredictedBounds",
    "ProblemInstance",
    "ProjectionNotConvergedError",
    "QPResult",
    "RateReport",
    "RegularityEstimate",
    "Schedule",
    "SetOracle",
    "SolverConfig",
    "Sphere",
    "Trace",
    "TraceRecord",
    "UnionOfConvex",
    "UsageError",
    "ZeroGapError",
    "analyze_trace",
    "check_sosh",
    "check_super_regular",
    "derived_halfspace",
    "estimate_regularity",
    "eta",
    "gallery_entries",
    "gallery_names",
    "get_entry",
    "halfspace_from_projection",
    "merit_value",
    "normal_at",
    "predicted_bounds",
    "project",
    "project_onto_polyhedron",
    "relaxed_point",
    "run_averaged_projections",
    "run_basic_shqp",
    "run_experiment",
    "run_global",
    "run_map",
    "run_mass_projection",
    "run_memory_shqp",
    "run_sweep",
    "run_two_shqp",
]
