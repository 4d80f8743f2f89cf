"""
Second-stage evaluation of a fixed first stage.

With routes and vehicle types fixed, each scenario's recourse problem is a
small LP in the recourse fractions y and unserved fractions w. Scenarios are
independent and can be evaluated concurrently.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..domain import CostParams, Instance, Neighborhoods, ScenarioSet, recourse_cost, recourse_time
from .backends import Backend, solve
from .decode import PlannedRoute, PlanSolution, build_plan
from .model import MipError, MipModel, ModelBuilder, Sense, SolveStatus, vname

logger = logging.getLogger(__name__)


class RecourseError(MipError):
    """The fixed first stage cannot be evaluated."""

    pass


@dataclass(frozen=True, eq=False)
class RecourseResult:
    scenario_id: int
    fractions: dict[tuple[int, int], float]
    unserved: np.ndarray
    loads: np.ndarray
    durations: np.ndarray
    cost: float
    status: SolveStatus


def _routes_of(first_stage: PlanSolution | list[PlannedRoute] | tuple[PlannedRoute, ...]) -> list[PlannedRoute]:
    if isinstance(first_stage, PlanSolution):
        return list(first_stage.routes)
    return list(first_stage)


def build_recourse_model(
    routes: list[PlannedRoute],
    instance: Instance,
    neighborhoods: Neighborhoods,
    costs: CostParams,
    demand: np.ndarray,
    name: str = "recourse",
) -> tuple[MipModel, dict[tuple[int, int, int], int]]:
    """LP over (y, w) for one demand vector; returns the model and the y index by (route, i, j)."""
    b = ModelBuilder(name, kind="recourse")
    out_sets = neighborhoods.out_sets
    y: dict[tuple[int, int, int], int] = {}
    for k, planned in enumerate(routes):
        for i in planned.sequence:
            for j in out_sets[i]:
                y[k, i, j] = b.add_var(vname("y", f"r{k}", i, j), obj=recourse_cost(instance, costs, i, j))
    w = {j: b.add_var(vname("w", j), obj=costs.gamma * demand[j]) for j in instance.customers}

    covering: dict[int, list[int]] = {j: [] for j in instance.customers}
    for (k, i, j), idx in y.items():
        covering[j].append(idx)
    for j in instance.customers:
        b.add_constraint(vname("cover", j), [(idx, 1.0) for idx in covering[j]] + [(w[j], 1.0)], Sense.EQ, 1.0)
    for k, planned in enumerate(routes):
        p = instance.vehicle_type(planned.vehicle_type)
        slack = instance.shift_limit - planned.route.length / p.speed
        if slack < -1e-9:
            raise RecourseError(f"Route {planned.sequence} on {p.id} exceeds the shift without recourse")
        terms = [(y[k, i, j], demand[j]) for i in planned.sequence for j in out_sets[i]]
        b.add_constraint(vname("capacity", f"r{k}"), terms, Sense.LE, p.capacity)
        times = [
            (y[k, i, j], recourse_time(instance, costs, i, j, p)) for i in planned.sequence for j in out_sets[i]
        ]
        b.add_constraint(vname("time", f"r{k}"), times, Sense.LE, max(slack, 0.0))
    return b.build(), y


def evaluate_recourse(
    first_stage: PlanSolution | list[PlannedRoute],
    instance: Instance,
    scenarios: ScenarioSet,
    neighborhoods: Neighborhoods,
    costs: CostParams,
    scenario_id: int,
    backend: Backend | str = Backend.INTERNAL,
) -> RecourseResult:
    """Optimal recourse and outsourcing for one scenario with the first stage fixed."""
    routes = _routes_of(first_stage)
    seen: set[int] = set()
    for planned in routes:
        if seen.intersection(planned.sequence):
            raise RecourseError(f"Route {planned.sequence} shares nodes with another route")
        seen.update(planned.sequence)
    demand = scenarios.demands[scenario_id]
    model, y = build_recourse_model(
        routes, instance, neighborhoods, costs, demand, name=vname("recourse", f"s{scenario_id}")
    )
    raw = solve(model, backend)
    if not raw.has_solution:
        # w = 1 everywhere is always feasible
        raise RecourseError(f"Recourse LP for scenario {scenario_id} returned {raw.status.value}")

    fractions: dict[tuple[int, int], float] = {}
    loads = np.zeros(len(routes))
    durations = np.array(
        [r.route.length / instance.vehicle_type(r.vehicle_type).speed for r in routes], dtype=float
    )
    for (k, i, j), idx in y.items():
        value = float(raw.values[idx])
        if value <= 0.0:
            continue
        fractions[i, j] = fractions.get((i, j), 0.0) + value
        p = instance.vehicle_type(routes[k].vehicle_type)
        loads[k] += value * demand[j]
        durations[k] += value * recourse_time(instance, costs, i, j, p)
    unserved = np.zeros(len(instance.nodes))
    for j in instance.customers:
        unserved[j] = raw.value(model, vname("w", j))
    return RecourseResult(
        scenario_id=scenario_id,
        fractions=fractions,
        unserved=unserved,
        loads=loads,
        durations=durations,
        cost=raw.objective,
        status=raw.status,
    )


def evaluate_plan(
    first_stage: PlanSolution | list[PlannedRoute],
    instance: Instance,
    scenarios: ScenarioSet,
    neighborhoods: Neighborhoods,
    costs: CostParams,
    backend: Backend | str = Backend.INTERNAL,
    workers: int = 1,
) -> PlanSolution:
    """Evaluate fixed routes against every scenario and assemble the resulting plan."""
    routes = _routes_of(first_stage)

    def run(s: int) -> RecourseResult:
        return evaluate_recourse(routes, instance, scenarios, neighborhoods, costs, s, backend)

    if workers > 1 and scenarios.n_scenarios > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, range(scenarios.n_scenarios)))
    else:
        results = [run(s) for s in range(scenarios.n_scenarios)]

    fractions = {
        (result.scenario_id, i, j): value for result in results for (i, j), value in result.fractions.items()
    }
    unserved = np.array([result.unserved for result in results])
    plan = build_plan(instance, scenarios, costs, routes, fractions, unserved)
    logger.info(
        f"Evaluated {len(routes)} routes over {scenarios.n_scenarios} scenarios: cost {plan.costs.total:.6f}"
    )
    return plan
