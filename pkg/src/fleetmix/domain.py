"""
Core data model for fleet-mix planning instances.

Instances, vehicle types, demand scenarios, recourse neighborhoods and cost
parameters. All types are immutable after construction; numpy arrays held by
them are flagged read-only so they can be shared across worker processes.
"""

import logging
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)

DEPOT = 0
VEHICLE_ID_PATTERN = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


class DomainError(ValueError):
    """Base exception for invalid domain data."""

    pass


class UnknownVehicleTypeError(DomainError):
    """A vehicle type id is not part of the instance."""

    pass


class RecourseCostMode(Enum):
    """How an approximate recourse action is charged."""

    FLAT = "flat"
    DISTANCE = "distance"


class TravelCostMode(Enum):
    """How the variable cost of a routing arc is charged."""

    DISTANCE = "distance"
    PER_ARC = "per_arc"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    base_demand: float = 0.0

    def __post_init__(self):
        if self.base_demand < 0:
            raise DomainError(f"Node {self.id} has negative base demand {self.base_demand}")
        if math.isnan(self.x) or math.isnan(self.y):
            raise DomainError(f"Node {self.id} has NaN coordinates")


@dataclass(frozen=True)
class VehicleType:
    """A vehicle class: capacity in parcel units, costs in €/day and €/km, speed in km/h."""

    id: str
    capacity: float
    fixed_cost: float
    unit_distance_cost: float
    speed: float
    driving_range: float = math.inf

    def __post_init__(self):
        if not VEHICLE_ID_PATTERN.match(self.id):
            raise DomainError(f"Vehicle type id {self.id!r} must be an identifier-like token")
        if self.capacity <= 0 or self.speed <= 0:
            raise DomainError(f"Vehicle type {self.id}: capacity and speed must be positive")
        if self.fixed_cost < 0 or self.unit_distance_cost < 0:
            raise DomainError(f"Vehicle type {self.id}: costs must be non-negative")
        if self.driving_range <= 0:
            raise DomainError(f"Vehicle type {self.id}: driving range must be positive")


def build_distance_matrix(nodes: list[Node] | tuple[Node, ...]) -> np.ndarray:
    """Euclidean distances between planar km coordinates."""
    if len(nodes) < 2:
        raise DomainError("At least two nodes (depot and one customer) are required")
    coords = np.array([(n.x, n.y) for n in nodes], dtype=float)
    if np.isnan(coords).any():
        raise DomainError("NaN coordinates are not allowed")
    diff = coords[:, None, :] - coords[None, :, :]
    distance = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(distance, 0.0)
    return distance


@dataclass(frozen=True, eq=False)
class Instance:
    """
    Depot plus demand nodes, fleet description and shift limit.

    ``distance`` is in km, ``service_time`` in hours per node and
    ``shift_limit`` in hours. Travel times are derived per vehicle type.
    """

    nodes: tuple[Node, ...]
    vehicle_types: tuple[VehicleType, ...]
    distance: np.ndarray
    service_time: np.ndarray
    shift_limit: float
    name: str = ""

    def __post_init__(self):
        n = len(self.nodes)
        if [node.id for node in self.nodes] != list(range(n)):
            raise DomainError("Node ids must be contiguous 0..N with the depot at 0")
        if self.nodes[DEPOT].base_demand != 0:
            raise DomainError("The depot cannot carry demand")
        if not self.vehicle_types:
            raise DomainError("At least one vehicle type is required")
        ids = [p.id for p in self.vehicle_types]
        if len(set(ids)) != len(ids):
            raise DomainError(f"Duplicate vehicle type ids: {ids}")
        if self.shift_limit <= 0:
            raise DomainError(f"Shift limit must be positive, got {self.shift_limit}")
        distance = np.asarray(self.distance, dtype=float)
        if distance.shape != (n, n):
            raise DomainError(f"Distance matrix shape {distance.shape} does not match {n} nodes")
        if (distance < 0).any() or np.any(np.diag(distance) != 0):
            raise DomainError("Distances must be non-negative with a zero diagonal")
        service = np.asarray(self.service_time, dtype=float)
        if service.shape != (n,) or (service < 0).any():
            raise DomainError("Service times must be one non-negative value per node")
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "vehicle_types", tuple(self.vehicle_types))
        object.__setattr__(self, "distance", _frozen(distance))
        object.__setattr__(self, "service_time", _frozen(service))

    @classmethod
    def from_nodes(
        cls,
        nodes: list[Node],
        vehicle_types: list[VehicleType] | tuple[VehicleType, ...],
        shift_limit: float,
        service_time: list[float] | np.ndarray | None = None,
        name: str = "",
    ) -> "Instance":
        if service_time is None:
            service_time = np.zeros(len(nodes))
        return cls(
            nodes=tuple(nodes),
            vehicle_types=tuple(vehicle_types),
            distance=build_distance_matrix(nodes),
            service_time=np.asarray(service_time, dtype=float),
            shift_limit=shift_limit,
            name=name,
        )

    @property
    def n_customers(self) -> int:
        return len(self.nodes) - 1

    @property
    def customers(self) -> range:
        return range(1, len(self.nodes))

    @property
    def base_demands(self) -> np.ndarray:
        return np.array([node.base_demand for node in self.nodes], dtype=float)

    @property
    def max_capacity(self) -> float:
        """l^max, the largest capacity over vehicle types."""
        return max(p.capacity for p in self.vehicle_types)

    @cached_property
    def travel_time(self) -> dict[str, np.ndarray]:
        """Per-type travel time matrices in hours."""
        return {p.id: _frozen(self.distance / p.speed) for p in self.vehicle_types}

    def vehicle_type(self, vehicle: "VehicleType | str") -> VehicleType:
        type_id = vehicle.id if isinstance(vehicle, VehicleType) else vehicle
        for p in self.vehicle_types:
            if p.id == type_id:
                return p
        raise UnknownVehicleTypeError(f"Unknown vehicle type: {type_id}")

    def route_length(self, sequence: tuple[int, ...] | list[int]) -> float:
        """Closed-tour length of a depot-rooted route."""
        if not sequence:
            return 0.0
        stops = [DEPOT, *sequence, DEPOT]
        return float(sum(self.distance[a, b] for a, b in zip(stops, stops[1:])))

    def with_vehicle_types(self, vehicle_types: tuple[VehicleType, ...]) -> "Instance":
        return replace(self, vehicle_types=vehicle_types)


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Per-scenario demands (rows) over all nodes (columns, depot at 0) with probabilities."""

    demands: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        demands = np.atleast_2d(np.asarray(self.demands, dtype=float))
        probabilities = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if demands.shape[0] != probabilities.shape[0] or demands.shape[0] == 0:
            raise DomainError(
                f"{demands.shape[0]} demand rows do not match {probabilities.shape[0]} probabilities"
            )
        if (probabilities < 0).any() or (probabilities > 1).any():
            raise DomainError("Probabilities must lie in [0, 1]")
        if abs(probabilities.sum() - 1.0) > 1e-9:
            raise DomainError(f"Probabilities sum to {probabilities.sum()}, expected 1")
        if (demands < 0).any():
            raise DomainError("Demands must be non-negative")
        if np.any(demands[:, DEPOT] != 0):
            raise DomainError("Depot demand must be zero in every scenario")
        object.__setattr__(self, "demands", _frozen(demands))
        object.__setattr__(self, "probabilities", _frozen(probabilities))

    @classmethod
    def uniform(cls, demands: np.ndarray) -> "ScenarioSet":
        demands = np.atleast_2d(np.asarray(demands, dtype=float))
        count = demands.shape[0]
        return cls(demands=demands, probabilities=np.full(count, 1.0 / count))

    @classmethod
    def deterministic(cls, demand: np.ndarray) -> "ScenarioSet":
        return cls(demands=np.asarray(demand, dtype=float)[None, :], probabilities=np.ones(1))

    @property
    def n_scenarios(self) -> int:
        return int(self.demands.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.demands.shape[1])

    def expected_demand(self) -> np.ndarray:
        return self.probabilities @ self.demands

    def expected(self) -> "ScenarioSet":
        """Single-scenario set holding the expected demand."""
        return ScenarioSet.deterministic(self.expected_demand())

    def single(self, scenario_id: int) -> "ScenarioSet":
        return ScenarioSet.deterministic(self.demands[scenario_id])

    def subset(self, scenario_ids: list[int], probabilities: np.ndarray) -> "ScenarioSet":
        return ScenarioSet(demands=self.demands[list(scenario_ids)], probabilities=probabilities)

    def check_instance(self, instance: Instance) -> None:
        if self.n_nodes != len(instance.nodes):
            raise DomainError(
                f"Scenarios cover {self.n_nodes} nodes but the instance has {len(instance.nodes)}"
            )


@dataclass(frozen=True)
class Neighborhoods:
    """
    Recourse neighborhoods.

    ``out_sets[i]`` lists the nodes a vehicle visiting i may serve by
    recourse, ``in_sets[j]`` the nodes that may serve j. Index 0 (depot) is
    always empty.
    """

    out_radius: float
    in_radius: float
    out_sets: tuple[tuple[int, ...], ...]
    in_sets: tuple[tuple[int, ...], ...]

    def pairs(self) -> list[tuple[int, int]]:
        """All (origin, target) recourse pairs, self-service included."""
        return [(i, j) for i, targets in enumerate(self.out_sets) for j in targets]


def build_neighborhoods(
    instance: Instance, out_radius: float, in_radius: float | None = None
) -> Neighborhoods:
    """
    Build recourse neighborhoods from distance radii (km).

    j is in the out-set of i when δ_ji ≤ out_radius. The in-sets are the
    exact dual of the out-sets; ``in_radius`` is recorded with them and
    does not filter membership.
    """
    if in_radius is None:
        in_radius = out_radius
    if out_radius <= 0 or in_radius <= 0:
        raise DomainError("Neighborhood radii must be positive")
    n = len(instance.nodes)
    out_sets: list[tuple[int, ...]] = [()]
    for i in instance.customers:
        members = tuple(j for j in instance.customers if j == i or instance.distance[j, i] <= out_radius)
        out_sets.append(members)
    in_lists: list[list[int]] = [[] for _ in range(n)]
    for i, members in enumerate(out_sets):
        for j in members:
            in_lists[j].append(i)
    return Neighborhoods(
        out_radius=out_radius,
        in_radius=in_radius,
        out_sets=tuple(out_sets),
        in_sets=tuple(tuple(members) for members in in_lists),
    )


@dataclass(frozen=True)
class CostParams:
    beta: float = 2.0
    gamma: float = 100.0
    recourse_unit_cost: float = 0.20
    recourse_cost_mode: RecourseCostMode = RecourseCostMode.DISTANCE
    travel_cost_mode: TravelCostMode = TravelCostMode.DISTANCE

    def __post_init__(self):
        if self.beta < 1:
            raise DomainError(f"beta must be at least 1, got {self.beta}")
        if self.gamma < 0 or self.recourse_unit_cost < 0:
            raise DomainError("gamma and the recourse unit cost must be non-negative")

    def check_dominance(self, neighborhoods: Neighborhoods) -> bool:
        """Warn when outsourcing is cheaper than the longest recourse action."""
        bound = self.beta * self.recourse_unit_cost * neighborhoods.out_radius
        if self.gamma < bound:
            logger.warning(
                f"gamma={self.gamma} is below beta*c_rec*radius={bound:.4f}: "
                f"outsourcing dominates recourse"
            )
            return False
        return True


def fixed_route_cost(instance: Instance, vehicle: VehicleType | str, end_node: int) -> float:
    """f_p plus the variable cost of the return leg from ``end_node``."""
    p = instance.vehicle_type(vehicle)
    if end_node not in instance.customers:
        raise DomainError(f"End node {end_node} is not a demand node")
    return p.fixed_cost + p.unit_distance_cost * float(instance.distance[end_node, DEPOT])


def arc_cost(instance: Instance, costs: CostParams, i: int, j: int, vehicle: VehicleType | str) -> float:
    p = instance.vehicle_type(vehicle)
    if costs.travel_cost_mode is TravelCostMode.PER_ARC:
        return p.unit_distance_cost
    return p.unit_distance_cost * float(instance.distance[i, j])


def route_travel_cost(
    instance: Instance, costs: CostParams, sequence: tuple[int, ...], vehicle: VehicleType | str
) -> float:
    """Variable cost of a closed route: charged arcs out of the depot plus the return leg."""
    p = instance.vehicle_type(vehicle)
    if not sequence:
        return 0.0
    stops = [DEPOT, *sequence]
    total = sum(arc_cost(instance, costs, a, b, p) for a, b in zip(stops, stops[1:]))
    return total + p.unit_distance_cost * float(instance.distance[sequence[-1], DEPOT])


def cheapest_orientation(
    instance: Instance, costs: CostParams, sequence: tuple[int, ...], vehicle: VehicleType | str
) -> tuple[tuple[int, ...], float]:
    """The driving direction of ``sequence`` with the lower travel cost (forward on ties)."""
    forward = tuple(sequence)
    backward = forward[::-1]
    forward_cost = route_travel_cost(instance, costs, forward, vehicle)
    backward_cost = route_travel_cost(instance, costs, backward, vehicle)
    if backward_cost < forward_cost - 1e-12:
        return backward, backward_cost
    return forward, forward_cost


def recourse_cost(instance: Instance, costs: CostParams, i: int, j: int) -> float:
    """Cost of serving all of j's demand from i, before weighting by the fraction."""
    if costs.recourse_cost_mode is RecourseCostMode.DISTANCE:
        return costs.beta * costs.recourse_unit_cost * float(instance.distance[i, j])
    if i == j:
        return 0.0
    return costs.beta * costs.recourse_unit_cost


def recourse_time(instance: Instance, costs: CostParams, i: int, j: int, vehicle: VehicleType | str) -> float:
    """Service time at the origin plus the inflated travel time of a recourse action."""
    p = instance.vehicle_type(vehicle)
    return float(instance.service_time[i]) + costs.beta * float(instance.travel_time[p.id][i, j])


@dataclass(frozen=True)
class FleetProfile:
    """Named parameter set for vehicle types, costs, radius and shift."""

    name: str
    vehicle_types: tuple[VehicleType, ...]
    costs: CostParams = field(default_factory=CostParams)
    radius: float = 2.0
    shift_limit: float = 5.0


SMALL_PROFILE = FleetProfile(
    name="small",
    vehicle_types=(
        VehicleType("CM", capacity=15, fixed_cost=7, unit_distance_cost=0.20, speed=45),
        VehicleType("ECB", capacity=5, fixed_cost=3, unit_distance_cost=0.15, speed=15),
    ),
)

LARGE_PROFILE = FleetProfile(
    name="large",
    vehicle_types=(
        VehicleType("CM", capacity=170, fixed_cost=13, unit_distance_cost=0.20, speed=45),
        VehicleType(
            "ECB", capacity=100, fixed_cost=6.5, unit_distance_cost=0.15, speed=15, driving_range=15
        ),
    ),
)

PROFILES = {profile.name: profile for profile in (SMALL_PROFILE, LARGE_PROFILE)}


def get_profile(name: str) -> FleetProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise DomainError(f"Unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
