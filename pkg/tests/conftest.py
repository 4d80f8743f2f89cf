import numpy as np
import pytest

from fleetmix.domain import CostParams, Instance, Node, ScenarioSet, VehicleType, build_neighborhoods
from fleetmix.mip import PlannedRoute
from fleetmix.routegen import Route

from .oracles import random_instance

SPLIT_COORDS = [
    (0.0, 0.0),
    (5.0, 1.5),
    (1.0, 5.0),
    (-3.0, 3.0),
    (-1.5, -3.0),
    (3.5, -2.0),
    (2.0, 6.2),
    (-2.0, -4.2),
    (-1.5, 6.2),
    (1.0, -1.8),
    (-3.5, 0.5),
    (3.5, 3.5),
]
SPLIT_DEMAND = [0, 2, 1, 2, 2, 1, 0, 0, 0, 0, 3, 4]


@pytest.fixture
def vehicle_types():
    """Motorcycle and cargo bike with the default desk-scale parameters."""
    return (
        VehicleType("CM", capacity=15, fixed_cost=7, unit_distance_cost=0.20, speed=45),
        VehicleType("ECB", capacity=5, fixed_cost=3, unit_distance_cost=0.15, speed=15),
    )


@pytest.fixture
def costs():
    return CostParams()


@pytest.fixture
def tiny_instance(vehicle_types):
    """Depot plus three customers on a line and one off to the side."""
    nodes = [
        Node(0, 0.0, 0.0),
        Node(1, 1.0, 0.0, 2.0),
        Node(2, 2.0, 0.0, 1.0),
        Node(3, 0.0, 1.5, 3.0),
    ]
    return Instance.from_nodes(nodes, vehicle_types, shift_limit=5.0, name="tiny")


@pytest.fixture
def tiny_scenarios():
    return ScenarioSet(
        demands=np.array([[0, 1.0, 2.0, 2.0], [0, 3.0, 0.0, 4.0]]),
        probabilities=np.array([0.5, 0.5]),
    )


@pytest.fixture
def tiny_neighborhoods(tiny_instance):
    return build_neighborhoods(tiny_instance, 1.2)


@pytest.fixture
def split_instance():
    """Two fixed routes with just enough spare capacity for the two off-route nodes."""
    nodes = [Node(i, x, y, float(d)) for i, ((x, y), d) in enumerate(zip(SPLIT_COORDS, SPLIT_DEMAND))]
    types = (
        VehicleType("CM", capacity=10, fixed_cost=7, unit_distance_cost=0.20, speed=45),
        VehicleType("ECB", capacity=5, fixed_cost=3, unit_distance_cost=0.15, speed=15),
    )
    return Instance.from_nodes(nodes, types, shift_limit=5.0, name="split")


@pytest.fixture
def split_routes(split_instance):
    return [
        PlannedRoute(Route.build(split_instance, (2, 3), canonical=False), "ECB"),
        PlannedRoute(Route.build(split_instance, (1, 5, 4), canonical=False), "CM"),
    ]


@pytest.fixture
def seeded_problem():
    """Four customers, two vehicle types, three scenarios."""
    return random_instance(seed=3, n_customers=4, n_scenarios=3)
