from .backends import Backend, ExternalSolverError, solve
from .decode import (
    CostBreakdown,
    CostReconciliationError,
    DecodeError,
    PlannedRoute,
    PlanSolution,
    RecourseAction,
    build_plan,
    decode_solution,
)
from .formulations import FIRST_STAGE, ModelContext, build_node_model, build_path_model, fleet_group
from .model import (
    MipError,
    MipModel,
    MipSolution,
    ModelBuildError,
    ModelBuilder,
    Sense,
    SolveLimits,
    SolveStatus,
    VarKind,
    vname,
)
from .mps import MpsError, export_mps, parse_mps
from .recourse import RecourseError, RecourseResult, evaluate_plan, evaluate_recourse
from .variants import IncompatibleReferenceError, MeasureVariant, apply_measure_variant

__all__ = [
    "FIRST_STAGE",
    "Backend",
    "CostBreakdown",
    "CostReconciliationError",
    "DecodeError",
    "ExternalSolverError",
    "IncompatibleReferenceError",
    "MeasureVariant",
    "MipError",
    "MipModel",
    "MipSolution",
    "ModelBuildError",
    "ModelBuilder",
    "ModelContext",
    "MpsError",
    "PlanSolution",
    "PlannedRoute",
    "RecourseAction",
    "RecourseError",
    "RecourseResult",
    "Sense",
    "SolveLimits",
    "SolveStatus",
    "VarKind",
    "apply_measure_variant",
    "build_node_model",
    "build_path_model",
    "build_plan",
    "decode_solution",
    "evaluate_plan",
    "evaluate_recourse",
    "export_mps",
    "fleet_group",
    "parse_mps",
    "solve",
    "vname",
]
