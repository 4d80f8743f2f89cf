"""
One planning problem: instance, scenarios, neighborhoods, costs and the
formulation to solve it with.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum

from .domain import CostParams, Instance, Neighborhoods, ScenarioSet
from .mip import (
    Backend,
    MeasureVariant,
    MipModel,
    MipSolution,
    PlanSolution,
    SolveLimits,
    apply_measure_variant,
    build_node_model,
    build_path_model,
    decode_solution,
    solve,
)
from .routegen import RoutePool

logger = logging.getLogger(__name__)


class ModelKind(Enum):
    NODE = "node"
    PATH = "path"


@dataclass(frozen=True, eq=False)
class PlanOutcome:
    plan: PlanSolution | None
    raw: MipSolution
    model: MipModel

    @property
    def objective(self) -> float:
        return self.raw.objective

    @property
    def is_optimal(self) -> bool:
        return self.raw.is_optimal


@dataclass(frozen=True, eq=False)
class PlanningProblem:
    instance: Instance
    scenarios: ScenarioSet
    neighborhoods: Neighborhoods
    costs: CostParams
    model_kind: ModelKind = ModelKind.NODE
    pool: RoutePool | None = None
    with_valid_ineq: bool = True

    def with_scenarios(self, scenarios: ScenarioSet) -> "PlanningProblem":
        return replace(self, scenarios=scenarios)

    def with_pool(self, pool: RoutePool) -> "PlanningProblem":
        return replace(self, pool=pool)

    def build_model(self) -> MipModel:
        if ModelKind(self.model_kind) is ModelKind.NODE:
            return build_node_model(
                self.instance, self.scenarios, self.neighborhoods, self.costs, self.with_valid_ineq
            )
        return build_path_model(self.instance, self.scenarios, self.neighborhoods, self.costs, self.pool)

    def solve(
        self,
        backend: Backend | str = Backend.INTERNAL,
        limits: SolveLimits | None = None,
        variant: MeasureVariant | str | None = None,
        reference: PlanSolution | None = None,
    ) -> PlanOutcome:
        model = self.build_model()
        if variant is not None:
            if reference is None:
                raise ValueError("A measure variant needs a reference plan")
            model = apply_measure_variant(model, variant, reference)
        raw = solve(model, backend, limits)
        plan = decode_solution(model, raw, self.instance, self.pool) if raw.has_solution else None
        if plan is None:
            logger.warning(f"{model.name}: no plan ({raw.status.value})")
        return PlanOutcome(plan=plan, raw=raw, model=model)
