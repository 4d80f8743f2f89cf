"""
Node-based and path-based formulations of the stochastic fleet-mix problem.

First stage: which routes run and with which vehicle type. Second stage,
per scenario: fractions y of each node's demand served by a route node in
its neighborhood (self-service included) and outsourced fractions w.
"""

import logging
from dataclasses import dataclass

from ..domain import (
    DEPOT,
    CostParams,
    Instance,
    Neighborhoods,
    ScenarioSet,
    arc_cost,
    cheapest_orientation,
    fixed_route_cost,
    recourse_cost,
    recourse_time,
)
from ..routegen import RoutePool
from .model import MipModel, ModelBuildError, ModelBuilder, Sense, VarKind, vname

logger = logging.getLogger(__name__)

FIRST_STAGE = "first_stage"


def fleet_group(type_id: str) -> str:
    return f"fleet:{type_id}"


@dataclass(frozen=True, eq=False)
class ModelContext:
    """Inputs a model was built from; carried along for decoding."""

    instance: Instance
    scenarios: ScenarioSet
    neighborhoods: Neighborhoods
    costs: CostParams
    pool: RoutePool | None = None


def _check_inputs(instance: Instance, scenarios: ScenarioSet, neighborhoods: Neighborhoods | None):
    if neighborhoods is None or len(neighborhoods.out_sets) != len(instance.nodes):
        raise ModelBuildError("Neighborhoods are missing or do not match the instance")
    if instance.shift_limit <= 0:
        raise ModelBuildError("Shift limit must be positive")
    scenarios.check_instance(instance)


def _scenario(s: int) -> str:
    return f"s{s}"


def build_node_model(
    instance: Instance,
    scenarios: ScenarioSet,
    neighborhoods: Neighborhoods,
    costs: CostParams,
    with_valid_ineq: bool = True,
) -> MipModel:
    """
    Node-based model: arcs x, route ends z, inner visits v, recourse y,
    outsourcing w, load u and time tau accumulators.
    """
    _check_inputs(instance, scenarios, neighborhoods)
    context = ModelContext(instance, scenarios, neighborhoods, costs)
    b = ModelBuilder(vname("node", instance.name or "instance"), kind="node", context=context)
    customers = list(instance.customers)
    all_nodes = [DEPOT, *customers]
    types = instance.vehicle_types
    scen = range(scenarios.n_scenarios)
    probs = scenarios.probabilities
    demand = scenarios.demands
    out_sets = neighborhoods.out_sets
    in_sets = neighborhoods.in_sets
    l_max = instance.max_capacity
    t_bar = instance.shift_limit

    z, v, x = {}, {}, {}
    for p in types:
        for i in customers:
            z[i, p.id] = b.add_var(
                vname("z", i, p.id),
                VarKind.BINARY,
                obj=fixed_route_cost(instance, p, i),
                group=FIRST_STAGE,
            )
            b.groups.setdefault(fleet_group(p.id), []).append(z[i, p.id])
            v[i, p.id] = b.add_var(vname("v", i, p.id), VarKind.BINARY, group=FIRST_STAGE)
        for i in all_nodes:
            for j in customers:
                if i != j:
                    x[i, j, p.id] = b.add_var(
                        vname("x", i, j, p.id),
                        VarKind.BINARY,
                        obj=arc_cost(instance, costs, i, j, p),
                        group=FIRST_STAGE,
                    )
    y, w, u, tau = {}, {}, {}, {}
    for s in scen:
        for i in customers:
            for j in out_sets[i]:
                y[i, j, s] = b.add_var(
                    vname("y", i, j, _scenario(s)),
                    obj=probs[s] * recourse_cost(instance, costs, i, j),
                )
        for j in customers:
            w[j, s] = b.add_var(vname("w", j, _scenario(s)), obj=probs[s] * costs.gamma * demand[s, j])
            u[j, s] = b.add_var(vname("u", j, _scenario(s)))
            tau[j, s] = b.add_var(vname("tau", j, _scenario(s)))

    def visited(i):
        return [(z[i, p.id], 1.0) for p in types] + [(v[i, p.id], 1.0) for p in types]

    for p in types:
        b.add_constraint(
            vname("trips", p.id),
            [(x[DEPOT, j, p.id], 1.0) for j in customers] + [(z[i, p.id], -1.0) for i in customers],
            Sense.EQ,
            0.0,
        )
        for j in customers:
            b.add_constraint(
                vname("inflow", j, p.id),
                [(x[i, j, p.id], 1.0) for i in all_nodes if i != j]
                + [(z[j, p.id], -1.0), (v[j, p.id], -1.0)],
                Sense.EQ,
                0.0,
            )
            b.add_constraint(
                vname("outflow", j, p.id),
                [(x[j, k, p.id], 1.0) for k in customers if k != j] + [(v[j, p.id], -1.0)],
                Sense.EQ,
                0.0,
            )
    for i in customers:
        b.add_constraint(vname("onetype", i), visited(i), Sense.LE, 1.0)

    for s in scen:
        tag = _scenario(s)
        for i in customers:
            for j in out_sets[i]:
                prefix = "selfserve" if i == j else "origin"
                b.add_constraint(
                    vname(prefix, i, j, tag),
                    [(y[i, j, s], 1.0)] + [(idx, -1.0) for idx, _ in visited(i)],
                    Sense.LE,
                    0.0,
                )
        for j in customers:
            b.add_constraint(
                vname("cover", j, tag),
                [(y[i, j, s], 1.0) for i in in_sets[j]] + [(w[j, s], 1.0)],
                Sense.EQ,
                1.0,
            )
        for i in customers:
            # u <= l_p when visited by type p, l_max otherwise
            b.add_constraint(
                vname("capacity", i, tag),
                [(u[i, s], 1.0)]
                + [(z[i, p.id], l_max - p.capacity) for p in types]
                + [(v[i, p.id], l_max - p.capacity) for p in types],
                Sense.LE,
                l_max,
            )
            b.add_constraint(
                vname("load", i, tag),
                [(u[i, s], 1.0)] + [(y[i, j, s], -demand[s, j]) for j in out_sets[i]],
                Sense.GE,
                0.0,
            )
        for i in customers:
            for j in customers:
                if i == j:
                    continue
                b.add_constraint(
                    vname("loadtrack", i, j, tag),
                    [(u[j, s], 1.0), (u[i, s], -1.0)]
                    + [(y[j, h, s], -demand[s, h]) for h in out_sets[j]]
                    + [(x[i, j, p.id], -l_max) for p in types],
                    Sense.GE,
                    -l_max,
                )
        for p in types:
            times = instance.travel_time[p.id]
            for j in customers:
                rec_terms = [(y[j, h, s], -recourse_time(instance, costs, j, h, p)) for h in out_sets[j]]
                big_m = t_bar + sum(recourse_time(instance, costs, j, h, p) for h in out_sets[j])
                for i in all_nodes:
                    if i == j:
                        continue
                    terms = [(tau[j, s], 1.0), (x[i, j, p.id], -(times[i, j] + big_m)), *rec_terms]
                    if i != DEPOT:
                        terms.append((tau[i, s], -1.0))
                    b.add_constraint(vname("timetrack", i, j, p.id, tag), terms, Sense.GE, -big_m)
        for i in customers:
            b.add_constraint(
                vname("return", i, tag),
                [(tau[i, s], 1.0)]
                + [(z[i, p.id], float(instance.travel_time[p.id][i, DEPOT])) for p in types],
                Sense.LE,
                t_bar,
            )
        if with_valid_ineq:
            b.add_constraint(
                vname("fleetcap", tag),
                [(z[i, p.id], p.capacity) for i in customers for p in types]
                + [(y[i, j, s], -demand[s, j]) for i in customers for j in out_sets[i]],
                Sense.GE,
                0.0,
            )
    model = b.build()
    logger.info(f"Node model {model.describe()}")
    return model


def build_path_model(
    instance: Instance,
    scenarios: ScenarioSet,
    neighborhoods: Neighborhoods,
    costs: CostParams,
    pool: RoutePool,
) -> MipModel:
    """
    Path-based model over a fixed route pool: psi selects a route and its
    vehicle type, y and w are the per-scenario recourse decisions.
    """
    _check_inputs(instance, scenarios, neighborhoods)
    if pool is None or len(pool) == 0:
        raise ModelBuildError("The path model needs a nonempty route pool")
    missing = pool.missing_elementary(instance)
    if missing:
        raise ModelBuildError(f"Route pool lacks elementary routes for nodes {missing}")
    context = ModelContext(instance, scenarios, neighborhoods, costs, pool)
    b = ModelBuilder(vname("path", instance.name or "instance"), kind="path", context=context)
    customers = list(instance.customers)
    scen = range(scenarios.n_scenarios)
    probs = scenarios.probabilities
    demand = scenarios.demands
    out_sets = neighborhoods.out_sets
    t_bar = instance.shift_limit

    psi: dict[tuple[int, str], int] = {}
    for r, route in enumerate(pool.routes):
        for p in instance.vehicle_types:
            if p.id not in route.feasible_types:
                continue
            if route.length / p.speed > t_bar + 1e-12:
                continue
            psi[r, p.id] = b.add_var(
                vname("psi", r, p.id),
                VarKind.BINARY,
                obj=p.fixed_cost + cheapest_orientation(instance, costs, route.sequence, p)[1],
                group=FIRST_STAGE,
            )
            b.groups.setdefault(fleet_group(p.id), []).append(psi[r, p.id])
    route_types = {
        r: [p for p in instance.vehicle_types if (r, p.id) in psi] for r in range(len(pool))
    }
    active_routes = [r for r in range(len(pool)) if route_types[r]]

    y: dict[tuple[int, int, int, int], int] = {}
    w: dict[tuple[int, int], int] = {}
    for s in scen:
        for r in active_routes:
            for i in pool.routes[r].sequence:
                for j in out_sets[i]:
                    y[r, i, j, s] = b.add_var(
                        vname("y", f"r{r}", i, j, _scenario(s)),
                        obj=probs[s] * recourse_cost(instance, costs, i, j),
                    )
        for j in customers:
            w[j, s] = b.add_var(vname("w", j, _scenario(s)), obj=probs[s] * costs.gamma * demand[s, j])

    for r in active_routes:
        b.add_constraint(
            vname("once", f"r{r}"), [(psi[r, p.id], 1.0) for p in route_types[r]], Sense.LE, 1.0
        )
    serving: dict[int, list[int]] = {i: [] for i in customers}
    for r in active_routes:
        for i in pool.routes[r].sequence:
            serving[i].extend(psi[r, p.id] for p in route_types[r])
    for i in customers:
        b.add_constraint(vname("visit", i), [(idx, 1.0) for idx in serving[i]], Sense.LE, 1.0)

    for s in scen:
        tag = _scenario(s)
        cover: dict[int, list[int]] = {j: [] for j in customers}
        for (r, i, j, s2), idx in y.items():
            if s2 == s:
                cover[j].append(idx)
        for j in customers:
            b.add_constraint(
                vname("cover", j, tag),
                [(idx, 1.0) for idx in cover[j]] + [(w[j, s], 1.0)],
                Sense.EQ,
                1.0,
            )
        for r in active_routes:
            route = pool.routes[r]
            selected = [(psi[r, p.id], -1.0) for p in route_types[r]]
            for i in route.sequence:
                for j in out_sets[i]:
                    b.add_constraint(
                        vname("link", f"r{r}", i, j, tag), [(y[r, i, j, s], 1.0), *selected], Sense.LE, 0.0
                    )
            b.add_constraint(
                vname("capacity", f"r{r}", tag),
                [(y[r, i, j, s], demand[s, j]) for i in route.sequence for j in out_sets[i]]
                + [(psi[r, p.id], -p.capacity) for p in route_types[r]],
                Sense.LE,
                0.0,
            )
            for p in route_types[r]:
                rec = [
                    (y[r, i, j, s], recourse_time(instance, costs, i, j, p))
                    for i in route.sequence
                    for j in out_sets[i]
                ]
                # inactive for other types: M is the largest possible recourse time
                big_m = sum(coef for _, coef in rec)
                b.add_constraint(
                    vname("time", f"r{r}", p.id, tag),
                    [(psi[r, p.id], route.length / p.speed + big_m), *rec],
                    Sense.LE,
                    t_bar + big_m,
                )
    model = b.build()
    logger.info(f"Path model {model.describe()} over {len(pool)} routes")
    return model
