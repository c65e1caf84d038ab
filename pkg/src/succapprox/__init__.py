"""Successive approximations for pairs of contractions.

Iterate x_{n+1} = nearest of {f(x_n), g(x_n)}, detect non-unique projections,
measure distances between pairs of maps, build certified perturbations and
check trajectory shadowing.
"""
__version__ = "0.1.0"

from .errors import (
    ConsistencyError,
    ConstructionError,
    ContractViolation,
    ConvergenceError,
    DomainError,
    PreconditionError,
    TieError,
)
from .geometry import (
    Ball,
    Box,
    Norm,
    contains,
    diameter,
    dist,
    hausdorff_finite,
    metric_projection_two,
    norm,
    sample_uniform,
)
from .maps import (
    Affine,
    Averaged,
    Bump,
    Constant,
    FunctionMap,
    Interval,
    MapExpr,
    Shifted,
    certify,
    d_infty,
    evaluate,
    extension_margin,
    fixed_point,
    lipschitz_bound,
    map_from_json,
    map_to_json,
    verify_self_map,
)
from .pairs import (
    PairMap,
    Pairing,
    PiecewiseSign,
    compare_pairs,
    evaluate_pair,
    pair_H,
    pair_h_infty,
    remark_counterexample,
    selection_match,
)
from .iteration import (
    BranchRule,
    Choice,
    IterationParams,
    TrajectoryReport,
    check_banach_bound,
    detect_cycle,
    iterate,
    tail_lock_in,
    trajectory_csv,
)
from .perturbations import (
    RegularizationResult,
    StabilityConstants,
    average_identity,
    bump_push,
    fixed_point_distance_bound,
    regularize_pair,
    shadowing_trial,
    shift_toward,
    stability_constants,
)
from .generators import random_affine_self_map, random_strict_pair, tie_pair

__all__ = [
    "__version__",
    "ConsistencyError",
    "ConstructionError",
    "ContractViolation",
    "ConvergenceError",
    "DomainError",
    "PreconditionError",
    "TieError",
    "Ball",
    "Box",
    "Norm",
    "contains",
    "diameter",
    "dist",
    "hausdorff_finite",
    "metric_projection_two",
    "norm",
    "sample_uniform",
    "Affine",
    "Averaged",
    "Bump",
    "Constant",
    "FunctionMap",
    "Interval",
    "MapExpr",
    "Shifted",
    "certify",
    "d_infty",
    "evaluate",
    "extension_margin",
    "fixed_point",
    "lipschitz_bound",
    "map_from_json",
    "map_to_json",
    "verify_self_map",
    "PairMap",
    "Pairing",
    "PiecewiseSign",
    "compare_pairs",
    "evaluate_pair",
    "pair_H",
    "pair_h_infty",
    "remark_counterexample",
    "selection_match",
    "BranchRule",
    "Choice",
    "IterationParams",
    "TrajectoryReport",
    "check_banach_bound",
    "detect_cycle",
    "iterate",
    "tail_lock_in",
    "trajectory_csv",
    "RegularizationResult",
    "StabilityConstants",
    "average_identity",
    "bump_push",
    "fixed_point_distance_bound",
    "regularize_pair",
    "shadowing_trial",
    "shift_toward",
    "stability_constants",
    "random_affine_self_map",
    "random_strict_pair",
    "tie_pair",
]
