"""
Plans decoded from solver output.

A ``PlanSolution`` holds the first-stage routes with their vehicle types and
the per-scenario recourse fractions, unserved fractions, loads and route
durations. Costs are always recomputed from the instance, never copied from
the solver, and reconciled against the reported objective.
"""

import logging
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from ..domain import (
    DEPOT,
    CostParams,
    Instance,
    ScenarioSet,
    cheapest_orientation,
    recourse_cost,
    recourse_time,
    route_travel_cost,
)
from ..routegen import Route, RoutePool, canonical_sequence
from .model import MipError, MipModel, MipSolution, vname

logger = logging.getLogger(__name__)

TOL = 1e-6
ACTIVE = 1e-12
RECONCILE_TOL = 1e-5


class DecodeError(MipError):
    """Solver values do not describe a valid plan."""

    pass


class CostReconciliationError(DecodeError):
    """Recomputed plan cost disagrees with the solver objective."""

    pass


@dataclass(frozen=True)
class PlannedRoute:
    route: Route
    vehicle_type: str

    @property
    def sequence(self) -> tuple[int, ...]:
        return self.route.sequence

    @property
    def key(self) -> tuple[tuple[int, ...], str]:
        return canonical_sequence(self.route.sequence), self.vehicle_type


@dataclass(frozen=True)
class RecourseAction:
    origin: int
    target: int
    fraction: float

    @property
    def is_self_service(self) -> bool:
        return self.origin == self.target


@dataclass(frozen=True)
class CostBreakdown:
    fixed: float
    travel: float
    expected_recourse: float
    expected_penalty: float

    @property
    def total(self) -> float:
        return self.fixed + self.travel + self.expected_recourse + self.expected_penalty

    def to_dict(self) -> dict:
        return {
            "fixed": _r(self.fixed),
            "travel": _r(self.travel),
            "expected_recourse": _r(self.expected_recourse),
            "expected_penalty": _r(self.expected_penalty),
            "total": _r(self.total),
        }


def _r(value: float) -> float:
    return round(float(value), 10) + 0.0


@dataclass(frozen=True, eq=False)
class PlanSolution:
    routes: tuple[PlannedRoute, ...]
    recourse: tuple[tuple[RecourseAction, ...], ...]
    unserved: np.ndarray
    costs: CostBreakdown
    loads: np.ndarray
    durations: np.ndarray
    scenario_costs: np.ndarray
    objective: float
    status: str = "optimal"

    @property
    def n_scenarios(self) -> int:
        return len(self.recourse)

    @property
    def fleet(self) -> dict[str, int]:
        return dict(sorted(Counter(r.vehicle_type for r in self.routes).items()))

    def fleet_counts(self, type_ids) -> dict[str, int]:
        fleet = self.fleet
        return {type_id: fleet.get(type_id, 0) for type_id in type_ids}

    @property
    def first_stage_key(self) -> tuple[tuple[tuple[int, ...], str], ...]:
        return tuple(sorted(r.key for r in self.routes))

    def distance_by_type(self) -> dict[str, float]:
        totals: dict[str, float] = {}
        for planned in self.routes:
            totals[planned.vehicle_type] = totals.get(planned.vehicle_type, 0.0) + planned.route.length
        return dict(sorted(totals.items()))

    def served_fraction(self, scenario_id: int, target: int) -> float:
        return sum(a.fraction for a in self.recourse[scenario_id] if a.target == target)

    def check_invariants(self, instance: Instance, tol: float = TOL) -> list[str]:
        """Violated plan invariants as messages; empty when the plan is valid."""
        problems = []
        on_route = Counter(i for planned in self.routes for i in planned.sequence)
        for node, count in on_route.items():
            if count > 1:
                problems.append(f"node {node} is on {count} routes")
        for k, planned in enumerate(self.routes):
            p = instance.vehicle_type(planned.vehicle_type)
            if planned.route.length > p.driving_range + tol:
                problems.append(f"route {k} exceeds the {p.id} driving range")
            for s in range(self.n_scenarios):
                if self.loads[s, k] > p.capacity + tol:
                    problems.append(f"route {k} scenario {s}: load {self.loads[s, k]:.6g} > {p.capacity}")
                if self.durations[s, k] > instance.shift_limit + tol:
                    problems.append(f"route {k} scenario {s}: duration {self.durations[s, k]:.6g} over shift")
        for s in range(self.n_scenarios):
            for j in instance.customers:
                w = float(self.unserved[s, j])
                if w < -tol or w > 1 + tol:
                    problems.append(f"scenario {s} node {j}: unserved fraction {w:.6g} outside [0, 1]")
                covered = self.served_fraction(s, j) + w
                if abs(covered - 1.0) > tol:
                    problems.append(f"scenario {s} node {j}: coverage {covered:.9g} != 1")
            for action in self.recourse[s]:
                if action.origin not in on_route:
                    problems.append(f"scenario {s}: recourse origin {action.origin} is not on a route")
        return problems

    def recourse_statistics(self, instance: Instance, scenarios: ScenarioSet) -> list[dict]:
        """Per-scenario counts of complete/split recourse and unserved customers."""
        rows = []
        for s in range(self.n_scenarios):
            demand = scenarios.demands[s]
            moves = [a for a in self.recourse[s] if not a.is_self_service]
            complete = sum(1 for a in moves if a.fraction >= 1 - TOL)
            split = sum(1 for a in moves if TOL < a.fraction < 1 - TOL)
            customers = [j for j in instance.customers if demand[j] > 0]
            fully = sum(1 for j in customers if self.unserved[s, j] >= 1 - TOL)
            partially = sum(1 for j in customers if TOL < self.unserved[s, j] < 1 - TOL)
            distances = [float(instance.distance[a.origin, a.target]) for a in moves if a.fraction > TOL]
            rows.append(
                {
                    "scenario": s,
                    "complete_recourse": complete,
                    "split_recourse": split,
                    "fully_unserved": fully,
                    "partially_unserved": partially,
                    "avg_recourse_distance": _r(sum(distances) / len(distances)) if distances else 0.0,
                    "cost": _r(self.scenario_costs[s]),
                }
            )
        return rows

    def to_dict(self) -> dict:
        scenarios = []
        for s in range(self.n_scenarios):
            unserved = {
                str(j): _r(w) for j, w in enumerate(self.unserved[s]) if j != DEPOT and w > ACTIVE
            }
            scenarios.append(
                {
                    "scenario": s,
                    "recourse": [
                        {"origin": a.origin, "target": a.target, "fraction": _r(a.fraction)}
                        for a in self.recourse[s]
                    ],
                    "unserved": unserved,
                    "loads": [_r(v) for v in self.loads[s]],
                    "durations": [_r(v) for v in self.durations[s]],
                    "cost": _r(self.scenario_costs[s]),
                }
            )
        return {
            "status": self.status,
            "objective": _r(self.objective),
            "fleet": self.fleet,
            "costs": self.costs.to_dict(),
            "routes": [
                {
                    "sequence": list(planned.sequence),
                    "vehicle_type": planned.vehicle_type,
                    "length": _r(planned.route.length),
                }
                for planned in self.routes
            ],
            "scenarios": scenarios,
        }

    @classmethod
    def from_dict(cls, data: dict, instance: Instance) -> "PlanSolution":
        try:
            routes = tuple(
                PlannedRoute(Route.build(instance, item["sequence"], canonical=False), item["vehicle_type"])
                for item in data["routes"]
            )
            n_nodes = len(instance.nodes)
            recourse, unserved, loads, durations, scenario_costs = [], [], [], [], []
            for item in data["scenarios"]:
                recourse.append(
                    tuple(RecourseAction(a["origin"], a["target"], a["fraction"]) for a in item["recourse"])
                )
                row = np.zeros(n_nodes)
                for j, w in item["unserved"].items():
                    row[int(j)] = w
                unserved.append(row)
                loads.append(item["loads"])
                durations.append(item["durations"])
                scenario_costs.append(item["cost"])
            costs = data["costs"]
            breakdown = CostBreakdown(
                costs["fixed"], costs["travel"], costs["expected_recourse"], costs["expected_penalty"]
            )
        except (KeyError, TypeError) as e:
            raise DecodeError(f"Malformed plan data: missing {e}") from e
        for planned in routes:
            instance.vehicle_type(planned.vehicle_type)
        n_routes = len(routes)
        return cls(
            routes=routes,
            recourse=tuple(recourse),
            unserved=np.array(unserved, dtype=float).reshape(len(unserved), n_nodes),
            costs=breakdown,
            loads=np.array(loads, dtype=float).reshape(len(loads), n_routes),
            durations=np.array(durations, dtype=float).reshape(len(durations), n_routes),
            scenario_costs=np.array(scenario_costs, dtype=float),
            objective=float(data.get("objective", breakdown.total)),
            status=data.get("status", "optimal"),
        )


def build_plan(
    instance: Instance,
    scenarios: ScenarioSet,
    costs: CostParams,
    routes: list[PlannedRoute],
    fractions: Mapping[tuple[int, int, int], float],
    unserved: np.ndarray,
    objective: float | None = None,
    status: str = "optimal",
) -> PlanSolution:
    """
    Assemble a plan from routes and per-scenario fractions keyed by
    (scenario, origin, target); loads, durations and costs are recomputed.
    """
    route_of: dict[int, int] = {}
    for k, planned in enumerate(routes):
        for i in planned.sequence:
            if i in route_of:
                raise DecodeError(f"Node {i} is visited by routes {route_of[i]} and {k}")
            route_of[i] = k
    n_scen = scenarios.n_scenarios
    demand = scenarios.demands
    probs = scenarios.probabilities
    unserved = np.clip(np.asarray(unserved, dtype=float), 0.0, 1.0)
    loads = np.zeros((n_scen, len(routes)))
    durations = np.zeros((n_scen, len(routes)))
    for k, planned in enumerate(routes):
        p = instance.vehicle_type(planned.vehicle_type)
        durations[:, k] = planned.route.length / p.speed

    actions: list[list[RecourseAction]] = [[] for _ in range(n_scen)]
    recourse_by_scenario = np.zeros(n_scen)
    for (s, i, j), value in sorted(fractions.items()):
        value = min(float(value), 1.0)
        if value <= ACTIVE:
            continue
        k = route_of.get(i)
        if k is None:
            if value > TOL:
                raise DecodeError(f"Scenario {s}: node {i} serves {j} but is not on any route")
            continue
        p = instance.vehicle_type(routes[k].vehicle_type)
        actions[s].append(RecourseAction(i, j, value))
        loads[s, k] += value * demand[s, j]
        durations[s, k] += value * recourse_time(instance, costs, i, j, p)
        recourse_by_scenario[s] += value * recourse_cost(instance, costs, i, j)

    penalty_by_scenario = costs.gamma * (demand * unserved).sum(axis=1)
    fixed = sum(instance.vehicle_type(r.vehicle_type).fixed_cost for r in routes)
    travel = sum(route_travel_cost(instance, costs, r.sequence, r.vehicle_type) for r in routes)
    breakdown = CostBreakdown(
        fixed=float(fixed),
        travel=float(travel),
        expected_recourse=float(probs @ recourse_by_scenario),
        expected_penalty=float(probs @ penalty_by_scenario),
    )
    return PlanSolution(
        routes=tuple(routes),
        recourse=tuple(tuple(a) for a in actions),
        unserved=unserved,
        costs=breakdown,
        loads=loads,
        durations=durations,
        scenario_costs=recourse_by_scenario + penalty_by_scenario,
        objective=breakdown.total if objective is None else float(objective),
        status=status,
    )


def _node_routes(model: MipModel, values: np.ndarray, instance: Instance) -> list[PlannedRoute]:
    def on(name: str) -> bool:
        idx = model.var_index.get(name)
        return idx is not None and values[idx] > 0.5

    customers = list(instance.customers)
    routes = []
    for p in instance.vehicle_types:
        visited = {i for i in customers if on(vname("z", i, p.id)) or on(vname("v", i, p.id))}
        reached: set[int] = set()
        for start in customers:
            if not on(vname("x", DEPOT, start, p.id)):
                continue
            sequence = [start]
            current = start
            while not on(vname("z", current, p.id)):
                if not on(vname("v", current, p.id)):
                    raise DecodeError(f"Broken flow for {p.id}: arc into {current} has no continuation")
                successors = [k for k in customers if k != current and on(vname("x", current, k, p.id))]
                if len(successors) != 1:
                    raise DecodeError(f"Broken flow for {p.id} at node {current}: successors {successors}")
                current = successors[0]
                if current in sequence or current in reached:
                    raise DecodeError(f"Route for {p.id} revisits node {current}: {sequence}")
                sequence.append(current)
            reached.update(sequence)
            routes.append(PlannedRoute(Route.build(instance, sequence, canonical=False), p.id))
        if reached != visited:
            raise DecodeError(
                f"Subtour or detached nodes for {p.id}: {sorted(visited.symmetric_difference(reached))}"
            )
    return routes


def _path_routes(
    model: MipModel, values: np.ndarray, instance: Instance, pool: RoutePool
) -> list[tuple[int, PlannedRoute]]:
    costs = model.context.costs
    selected = []
    for r, route in enumerate(pool.routes):
        for p in instance.vehicle_types:
            idx = model.var_index.get(vname("psi", r, p.id))
            if idx is None or values[idx] <= 0.5:
                continue
            oriented, _ = cheapest_orientation(instance, costs, route.sequence, p)
            selected.append((r, PlannedRoute(Route.build(instance, oriented, canonical=False), p.id)))
    return selected


def _value(model: MipModel, values: np.ndarray, name: str) -> float:
    idx = model.var_index.get(name)
    return 0.0 if idx is None else float(values[idx])


def decode_solution(
    model: MipModel,
    raw: MipSolution,
    instance: Instance | None = None,
    pool: RoutePool | None = None,
) -> PlanSolution:
    """Turn raw solver values of a node or path model into a checked plan."""
    context = model.context
    if context is None:
        raise DecodeError(f"Model {model.name} carries no build context")
    if not raw.has_solution:
        raise DecodeError(f"Solution of {model.name} has status {raw.status.value} and no values")
    instance = instance or context.instance
    scenarios = context.scenarios
    out_sets = context.neighborhoods.out_sets
    values = raw.values
    n_scen = scenarios.n_scenarios
    fractions: dict[tuple[int, int, int], float] = {}

    if model.kind == "node":
        routes = _node_routes(model, values, instance)
        for s in range(n_scen):
            for i in instance.customers:
                for j in out_sets[i]:
                    fractions[s, i, j] = _value(model, values, vname("y", i, j, f"s{s}"))
    elif model.kind == "path":
        pool = pool or context.pool
        if pool is None:
            raise DecodeError("Path model decoding needs the route pool")
        selected = _path_routes(model, values, instance, pool)
        routes = [planned for _, planned in selected]
        for s in range(n_scen):
            for r, planned in selected:
                for i in planned.sequence:
                    for j in out_sets[i]:
                        value = _value(model, values, vname("y", f"r{r}", i, j, f"s{s}"))
                        fractions[s, i, j] = fractions.get((s, i, j), 0.0) + value
    else:
        raise DecodeError(f"Cannot decode a model of kind {model.kind!r}")

    unserved = np.zeros((n_scen, len(instance.nodes)))
    for s in range(n_scen):
        for j in instance.customers:
            unserved[s, j] = _value(model, values, vname("w", j, f"s{s}"))
    plan = build_plan(
        instance, scenarios, context.costs, routes, fractions, unserved, raw.objective, raw.status.value
    )
    recomputed = plan.costs.total
    if abs(recomputed - raw.objective) > RECONCILE_TOL * max(1.0, abs(raw.objective)):
        raise CostReconciliationError(
            f"Recomputed cost {recomputed:.9g} differs from solver objective {raw.objective:.9g}"
        )
    logger.debug(f"Decoded {model.name}: fleet {plan.fleet}, cost {recomputed:.6f}")
    return plan
