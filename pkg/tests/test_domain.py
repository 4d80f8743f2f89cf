import math

import numpy as np
import pytest

from fleetmix.domain import (
    LARGE_PROFILE,
    SMALL_PROFILE,
    CostParams,
    DomainError,
    Instance,
    Node,
    RecourseCostMode,
    ScenarioSet,
    TravelCostMode,
    UnknownVehicleTypeError,
    VehicleType,
    build_distance_matrix,
    build_neighborhoods,
    cheapest_orientation,
    fixed_route_cost,
    get_profile,
    recourse_cost,
    recourse_time,
    route_travel_cost,
)


class TestVehicleType:
    def test_rejects_non_identifier_id(self):
        with pytest.raises(DomainError):
            VehicleType("cargo bike", capacity=5, fixed_cost=3, unit_distance_cost=0.15, speed=15)

    def test_rejects_zero_capacity(self):
        with pytest.raises(DomainError):
            VehicleType("ECB", capacity=0, fixed_cost=3, unit_distance_cost=0.15, speed=15)

    def test_default_range_is_unbounded(self):
        assert math.isinf(SMALL_PROFILE.vehicle_types[0].driving_range)


class TestInstance:
    def test_distance_matrix_is_symmetric_with_zero_diagonal(self, tiny_instance):
        d = tiny_instance.distance
        assert np.allclose(d, d.T)
        assert np.all(np.diag(d) == 0)
        assert d[0, 3] == pytest.approx(1.5)

    def test_arrays_are_read_only(self, tiny_instance):
        with pytest.raises(ValueError):
            tiny_instance.distance[0, 1] = 5.0

    def test_depot_cannot_carry_demand(self, vehicle_types):
        nodes = [Node(0, 0, 0, 1.0), Node(1, 1, 0, 1.0)]
        with pytest.raises(DomainError):
            Instance.from_nodes(nodes, vehicle_types, shift_limit=5)

    def test_node_ids_must_be_contiguous(self, vehicle_types):
        nodes = [Node(0, 0, 0), Node(2, 1, 0, 1.0)]
        with pytest.raises(DomainError):
            Instance.from_nodes(nodes, vehicle_types, shift_limit=5)

    def test_needs_a_customer(self):
        with pytest.raises(DomainError):
            build_distance_matrix([Node(0, 0, 0)])

    def test_travel_time_per_type(self, tiny_instance):
        assert tiny_instance.travel_time["CM"][0, 1] == pytest.approx(1 / 45)
        assert tiny_instance.travel_time["ECB"][0, 1] == pytest.approx(1 / 15)

    def test_unknown_vehicle_type(self, tiny_instance):
        with pytest.raises(UnknownVehicleTypeError):
            tiny_instance.vehicle_type("TRUCK")

    def test_route_length(self, tiny_instance):
        assert tiny_instance.route_length((1, 2)) == pytest.approx(4.0)
        assert tiny_instance.route_length(()) == 0.0

    def test_max_capacity(self, tiny_instance):
        assert tiny_instance.max_capacity == 15


class TestScenarioSet:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(DomainError):
            ScenarioSet(demands=np.zeros((2, 3)), probabilities=np.array([0.5, 0.4]))

    def test_depot_demand_must_be_zero(self):
        with pytest.raises(DomainError):
            ScenarioSet.uniform(np.array([[1.0, 2.0]]))

    def test_expected_demand(self, tiny_scenarios):
        assert np.allclose(tiny_scenarios.expected_demand(), [0, 2.0, 1.0, 3.0])
        assert tiny_scenarios.expected().n_scenarios == 1

    def test_single_and_subset(self, tiny_scenarios):
        assert np.allclose(tiny_scenarios.single(1).demands[0], [0, 3, 0, 4])
        subset = tiny_scenarios.subset([1], np.array([1.0]))
        assert subset.n_scenarios == 1

    def test_check_instance_mismatch(self, tiny_instance):
        scenarios = ScenarioSet.uniform(np.zeros((1, 3)))
        with pytest.raises(DomainError):
            scenarios.check_instance(tiny_instance)


class TestNeighborhoods:
    def test_self_is_always_included(self, tiny_instance):
        hoods = build_neighborhoods(tiny_instance, 0.1)
        for i in tiny_instance.customers:
            assert hoods.out_sets[i] == (i,)
        assert hoods.out_sets[0] == ()

    def test_in_sets_mirror_out_sets(self, tiny_neighborhoods):
        for i, targets in enumerate(tiny_neighborhoods.out_sets):
            for j in targets:
                assert i in tiny_neighborhoods.in_sets[j]

    def test_radius(self, tiny_neighborhoods):
        assert tiny_neighborhoods.out_sets[1] == (1, 2)
        assert tiny_neighborhoods.out_sets[3] == (3,)

    def test_rejects_non_positive_radius(self, tiny_instance):
        with pytest.raises(DomainError):
            build_neighborhoods(tiny_instance, 0.0)

    def test_collinear_customers(self, vehicle_types):
        nodes = [Node(0, 0.0, 5.0), Node(1, 0.0, 0.0, 1.0), Node(2, 1.0, 0.0, 1.0), Node(3, 2.0, 0.0, 1.0)]
        instance = Instance.from_nodes(nodes, vehicle_types, shift_limit=8.0)
        hoods = build_neighborhoods(instance, 1.5)
        assert hoods.out_sets[2] == (1, 2, 3)
        assert hoods.out_sets[1] == (1, 2)
        assert hoods.out_sets[3] == (2, 3)

    def test_small_in_radius_does_not_shrink_out_sets(self, tiny_instance):
        wide = build_neighborhoods(tiny_instance, 10.0)
        asymmetric = build_neighborhoods(tiny_instance, 10.0, 0.1)
        assert asymmetric.out_sets == wide.out_sets
        assert asymmetric.in_sets == wide.in_sets
        assert asymmetric.in_radius == 0.1

    @pytest.mark.parametrize("in_radius", [None, 0.1, 5.0])
    def test_radius_covering_the_network_reaches_every_customer(self, tiny_instance, in_radius):
        diameter = float(tiny_instance.distance.max())
        hoods = build_neighborhoods(tiny_instance, diameter, in_radius)
        for i in tiny_instance.customers:
            assert hoods.out_sets[i] == tuple(tiny_instance.customers)
            assert hoods.in_sets[i] == tuple(tiny_instance.customers)

    @pytest.mark.parametrize("in_radius", [None, 0.3])
    def test_out_sets_grow_with_radius(self, tiny_instance, in_radius):
        radii = [0.1, 0.5, 1.0, 1.2, 1.5, 2.0, 3.0, 10.0]
        previous = build_neighborhoods(tiny_instance, radii[0], in_radius)
        for radius in radii[1:]:
            current = build_neighborhoods(tiny_instance, radius, in_radius)
            for i in tiny_instance.customers:
                assert set(previous.out_sets[i]) <= set(current.out_sets[i])
            previous = current


class TestCosts:
    def test_fixed_route_cost_includes_return_leg(self, tiny_instance):
        assert fixed_route_cost(tiny_instance, "CM", 3) == pytest.approx(7 + 0.2 * 1.5)

    def test_route_travel_cost(self, tiny_instance, costs):
        assert route_travel_cost(tiny_instance, costs, (1, 2), "ECB") == pytest.approx(0.15 * 4.0)

    def test_per_arc_mode_charges_constant_arcs(self, tiny_instance):
        per_arc = CostParams(travel_cost_mode=TravelCostMode.PER_ARC)
        # two charged arcs plus the distance-based return leg
        assert route_travel_cost(tiny_instance, per_arc, (1, 2), "CM") == pytest.approx(0.2 * 2 + 0.2 * 2.0)

    def test_cheapest_orientation_prefers_short_return(self, tiny_instance):
        per_arc = CostParams(travel_cost_mode=TravelCostMode.PER_ARC)
        sequence, cost = cheapest_orientation(tiny_instance, per_arc, (1, 2), "CM")
        assert sequence == (2, 1)
        assert cost == pytest.approx(0.2 * 2 + 0.2 * 1.0)

    def test_cheapest_orientation_keeps_forward_on_ties(self, tiny_instance, costs):
        sequence, _ = cheapest_orientation(tiny_instance, costs, (2, 1), "CM")
        assert sequence == (2, 1)

    def test_recourse_cost_modes(self, tiny_instance, costs):
        assert recourse_cost(tiny_instance, costs, 1, 2) == pytest.approx(2 * 0.2 * 1.0)
        assert recourse_cost(tiny_instance, costs, 1, 1) == 0.0
        flat = CostParams(recourse_cost_mode=RecourseCostMode.FLAT)
        assert recourse_cost(tiny_instance, flat, 1, 3) == pytest.approx(2 * 0.2)
        assert recourse_cost(tiny_instance, flat, 1, 1) == 0.0

    def test_recourse_time(self, tiny_instance, costs):
        assert recourse_time(tiny_instance, costs, 1, 2, "ECB") == pytest.approx(2 * 1.0 / 15)

    def test_beta_below_one_is_rejected(self):
        with pytest.raises(DomainError):
            CostParams(beta=0.5)

    def test_dominance_warning(self, tiny_neighborhoods, caplog):
        cheap = CostParams(gamma=0.1)
        assert cheap.check_dominance(tiny_neighborhoods) is False
        assert "outsourcing dominates recourse" in caplog.text
        assert CostParams().check_dominance(tiny_neighborhoods) is True


class TestProfiles:
    def test_small_profile_defaults(self):
        cm, ecb = SMALL_PROFILE.vehicle_types
        assert (cm.capacity, ecb.capacity) == (15, 5)
        assert (cm.fixed_cost, ecb.fixed_cost) == (7, 3)
        assert (cm.speed, ecb.speed) == (45, 15)
        assert SMALL_PROFILE.shift_limit == 5.0
        assert SMALL_PROFILE.costs.gamma == 100.0

    def test_large_profile_overrides(self):
        cm, ecb = LARGE_PROFILE.vehicle_types
        assert (cm.capacity, ecb.capacity) == (170, 100)
        assert (cm.fixed_cost, ecb.fixed_cost) == (13, 6.5)
        assert ecb.driving_range == 15

    def test_unknown_profile(self):
        with pytest.raises(DomainError):
            get_profile("huge")
