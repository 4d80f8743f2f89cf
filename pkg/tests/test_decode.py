"""
Tests for decoding solver output into plans.
"""

import json

import numpy as np
import pytest

from fleetmix.mip import (
    Backend,
    DecodeError,
    MipSolution,
    PlannedRoute,
    PlanSolution,
    SolveLimits,
    SolveStatus,
    build_node_model,
    build_path_model,
    build_plan,
    decode_solution,
    solve,
)
from fleetmix.routegen import Route, enumerate_routes

TIGHT = SolveLimits(gap=1e-9)


@pytest.fixture
def node_model(tiny_instance, tiny_scenarios, tiny_neighborhoods, costs):
    return build_node_model(tiny_instance, tiny_scenarios, tiny_neighborhoods, costs)


@pytest.fixture
def node_plan(node_model):
    return decode_solution(node_model, solve(node_model, Backend.HIGHS, TIGHT))


def values_with(model, names):
    values = np.zeros(model.n_vars)
    for name in names:
        values[model.index(name)] = 1.0
    return MipSolution.create(values, 0.0, 0.0, SolveStatus.FEASIBLE, model.n_vars)


class TestDecodeNodeModel:
    def test_plan_is_valid(self, node_plan, tiny_instance):
        assert node_plan.check_invariants(tiny_instance) == []
        assert node_plan.routes
        assert sum(node_plan.fleet.values()) == len(node_plan.routes)

    def test_costs_are_recomputed(self, node_plan):
        assert node_plan.costs.total == pytest.approx(node_plan.objective, abs=1e-6)

    def test_no_solution(self, node_model):
        raw = MipSolution.create(None, float("inf"), float("inf"), SolveStatus.INFEASIBLE, node_model.n_vars)
        with pytest.raises(DecodeError, match="no values"):
            decode_solution(node_model, raw)

    def test_broken_flow(self, node_model):
        raw = values_with(node_model, ["x_0_1_CM"])
        with pytest.raises(DecodeError, match="Broken flow"):
            decode_solution(node_model, raw)

    def test_detached_subtour(self, node_model):
        # a depot route 0-3-0 plus a cycle 1-2-1 that never touches the depot
        raw = values_with(node_model, ["x_0_3_CM", "z_3_CM", "x_1_2_CM", "x_2_1_CM", "v_1_CM", "v_2_CM"])
        with pytest.raises(DecodeError, match="Subtour"):
            decode_solution(node_model, raw)

    def test_cost_mismatch(self, node_model):
        raw = values_with(node_model, ["x_0_3_CM", "z_3_CM"])
        with pytest.raises(DecodeError, match="differs from solver objective"):
            decode_solution(node_model, raw)


class TestDecodePathModel:
    def test_matches_node_plan_cost(self, tiny_instance, tiny_scenarios, tiny_neighborhoods, costs, node_plan):
        pool = enumerate_routes(tiny_instance)
        model = build_path_model(tiny_instance, tiny_scenarios, tiny_neighborhoods, costs, pool)
        plan = decode_solution(model, solve(model, Backend.HIGHS, TIGHT))
        assert plan.check_invariants(tiny_instance) == []
        assert plan.costs.total == pytest.approx(node_plan.costs.total, abs=1e-6)

    def test_needs_pool_for_path_kind(self, tiny_instance, tiny_scenarios, tiny_neighborhoods, costs):
        pool = enumerate_routes(tiny_instance)
        model = build_path_model(tiny_instance, tiny_scenarios, tiny_neighborhoods, costs, pool)
        raw = solve(model, Backend.HIGHS, TIGHT)
        plan = decode_solution(model, raw, tiny_instance, pool)
        assert plan.objective == pytest.approx(raw.objective)


class TestBuildPlan:
    """Plans assembled directly from routes and fractions."""

    def test_loads_durations_and_costs(self, tiny_instance, tiny_scenarios, costs):
        route = PlannedRoute(Route.build(tiny_instance, (1, 2), canonical=False), "ECB")
        fractions = {(0, 1, 1): 1.0, (0, 2, 2): 1.0, (1, 1, 1): 1.0, (1, 1, 2): 0.5}
        unserved = np.zeros((2, 4))
        unserved[:, 3] = 1.0
        unserved[1, 2] = 0.5
        plan = build_plan(tiny_instance, tiny_scenarios, costs, [route], fractions, unserved)
        assert plan.loads[:, 0].tolist() == pytest.approx([3.0, 3.0])
        assert plan.durations[1, 0] == pytest.approx(4 / 15 + 0.5 * 2 * 1 / 15)
        assert plan.costs.fixed == 3.0
        assert plan.costs.travel == pytest.approx(0.6)
        assert plan.costs.expected_recourse == pytest.approx(0.5 * 0.5 * 0.4)
        # node 3 outsourced in both scenarios, node 2 half outsourced with zero demand
        assert plan.costs.expected_penalty == pytest.approx(100 * (0.5 * 2 + 0.5 * 4))
        assert plan.served_fraction(1, 2) == pytest.approx(0.5)
        assert plan.check_invariants(tiny_instance) == []

    def test_node_on_two_routes(self, tiny_instance, tiny_scenarios, costs):
        routes = [
            PlannedRoute(Route.build(tiny_instance, (1, 2)), "CM"),
            PlannedRoute(Route.build(tiny_instance, (2,)), "ECB"),
        ]
        with pytest.raises(DecodeError):
            build_plan(tiny_instance, tiny_scenarios, costs, routes, {}, np.ones((2, 4)))

    def test_recourse_from_off_route_node(self, tiny_instance, tiny_scenarios, costs):
        routes = [PlannedRoute(Route.build(tiny_instance, (1,)), "CM")]
        with pytest.raises(DecodeError, match="not on any route"):
            build_plan(tiny_instance, tiny_scenarios, costs, routes, {(0, 3, 3): 1.0}, np.zeros((2, 4)))

    def test_invariant_messages(self, tiny_instance, tiny_scenarios, costs):
        route = PlannedRoute(Route.build(tiny_instance, (1, 2, 3), canonical=False), "ECB")
        fractions = {(s, i, i): 1.0 for s in range(2) for i in (1, 2, 3)}
        plan = build_plan(tiny_instance, tiny_scenarios, costs, [route], fractions, np.zeros((2, 4)))
        problems = plan.check_invariants(tiny_instance)
        assert any("load" in problem for problem in problems)


class TestSerialization:
    def test_round_trip_keeps_costs_and_routes(self, node_plan, tiny_instance):
        data = json.loads(json.dumps(node_plan.to_dict()))
        again = PlanSolution.from_dict(data, tiny_instance)
        first, second = node_plan.to_dict(), again.to_dict()
        assert second.pop("costs")["total"] == pytest.approx(first.pop("costs")["total"])
        assert second == first
        assert again.first_stage_key == node_plan.first_stage_key

    def test_malformed(self, tiny_instance):
        with pytest.raises(DecodeError, match="Malformed"):
            PlanSolution.from_dict({"routes": []}, tiny_instance)

    def test_fleet_helpers(self, tiny_instance, tiny_scenarios, costs):
        routes = [
            PlannedRoute(Route.build(tiny_instance, (1, 2)), "ECB"),
            PlannedRoute(Route.build(tiny_instance, (3,)), "ECB"),
        ]
        plan = build_plan(tiny_instance, tiny_scenarios, costs, routes, {}, np.ones((2, 4)))
        assert plan.fleet == {"ECB": 2}
        assert plan.fleet_counts(["CM", "ECB"]) == {"CM": 0, "ECB": 2}
        assert plan.distance_by_type() == {"ECB": pytest.approx(7.0)}
