"""
Reading and writing run artifacts.

JSON is written with sorted keys and a trailing newline and CSV through
pandas with a fixed float format, so the same inputs give byte-identical
files.
"""

import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .domain import DomainError, Instance, Node, ScenarioSet, VehicleType
from .instancegen import DensityGrid, InstanceGenError
from .mip import PlanSolution
from .routegen import Route, RouteGenError, RoutePool

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


class ArtifactError(ValueError):
    """An artifact file is malformed or inconsistent with its inputs."""

    pass


def write_json(path: Path | str, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: Path | str):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path} is not valid JSON: {e}") from e


def write_csv(path: Path | str, frame: pd.DataFrame | list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not isinstance(frame, pd.DataFrame):
        frame = pd.DataFrame(frame)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {path} ({len(frame)} rows)")
    return path


def _finite_or_none(value: float):
    return None if math.isinf(value) else value


def instance_to_dict(instance: Instance) -> dict:
    return {
        "name": instance.name,
        "nodes": [{"id": n.id, "x": n.x, "y": n.y, "base_demand": n.base_demand} for n in instance.nodes],
        "vehicle_types": [
            {
                "id": p.id,
                "capacity": p.capacity,
                "fixed_cost": p.fixed_cost,
                "unit_distance_cost": p.unit_distance_cost,
                "speed": p.speed,
                "driving_range": _finite_or_none(p.driving_range),
            }
            for p in instance.vehicle_types
        ],
        "service_time": [float(t) for t in instance.service_time],
        "shift_limit": instance.shift_limit,
    }


def instance_from_dict(data: dict) -> Instance:
    try:
        nodes = [
            Node(int(n["id"]), float(n["x"]), float(n["y"]), float(n.get("base_demand", 0.0)))
            for n in data["nodes"]
        ]
        vehicle_types = [
            VehicleType(
                id=p["id"],
                capacity=float(p["capacity"]),
                fixed_cost=float(p["fixed_cost"]),
                unit_distance_cost=float(p["unit_distance_cost"]),
                speed=float(p["speed"]),
                driving_range=math.inf if p.get("driving_range") is None else float(p["driving_range"]),
            )
            for p in data["vehicle_types"]
        ]
        return Instance.from_nodes(
            nodes,
            vehicle_types,
            shift_limit=float(data["shift_limit"]),
            service_time=data.get("service_time"),
            name=data.get("name", ""),
        )
    except (KeyError, TypeError) as e:
        raise ArtifactError(f"Instance data is missing field {e}") from e
    except DomainError as e:
        raise ArtifactError(f"Invalid instance: {e}") from e


def save_instance(path: Path | str, instance: Instance) -> Path:
    return write_json(path, instance_to_dict(instance))


def load_instance(path: Path | str) -> Instance:
    return instance_from_dict(read_json(path))


def scenarios_frame(scenarios: ScenarioSet) -> pd.DataFrame:
    frame = pd.DataFrame(
        scenarios.demands[:, 1:], columns=[f"d_{i}" for i in range(1, scenarios.n_nodes)]
    )
    frame.insert(0, "prob", scenarios.probabilities)
    frame.insert(0, "scenario", range(scenarios.n_scenarios))
    return frame


def save_scenarios(path: Path | str, scenarios: ScenarioSet) -> Path:
    return write_csv(path, scenarios_frame(scenarios))


def load_scenarios(path: Path | str, instance: Instance | None = None) -> ScenarioSet:
    """Read ``scenario,prob,d_1,...,d_N``; rows are taken in file order."""
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise ArtifactError(f"{path}: unreadable CSV: {e}") from e
    if list(frame.columns[:2]) != ["scenario", "prob"]:
        raise ArtifactError(f"{path}: header must start with 'scenario,prob'")
    demand_columns = list(frame.columns[2:])
    expected = [f"d_{i}" for i in range(1, len(demand_columns) + 1)]
    if demand_columns != expected:
        raise ArtifactError(f"{path}: demand columns must be d_1..d_N, got {demand_columns}")
    if frame.isna().any().any():
        raise ArtifactError(f"{path}: empty cells are not allowed")
    demands = np.zeros((len(frame), len(demand_columns) + 1))
    demands[:, 1:] = frame[demand_columns].to_numpy(dtype=float)
    try:
        scenarios = ScenarioSet(demands=demands, probabilities=frame["prob"].to_numpy(dtype=float))
        if instance is not None:
            scenarios.check_instance(instance)
    except DomainError as e:
        raise ArtifactError(f"{path}: {e}") from e
    return scenarios


def pool_to_dict(pool: RoutePool) -> dict:
    return {
        "routes": [
            {
                "sequence": list(route.sequence),
                "length": round(route.length, 10),
                "feasible_types": sorted(route.feasible_types),
                "activation_count": count,
            }
            for route, count in zip(pool.routes, pool.activation_count)
        ]
    }


def pool_from_dict(data: dict, instance: Instance) -> RoutePool:
    try:
        items = data["routes"]
        for item in items:
            if any(int(i) not in instance.customers for i in item["sequence"]):
                raise ArtifactError(f"Route {item['sequence']} visits nodes outside the instance")
        routes = tuple(Route.build(instance, item["sequence"]) for item in items)
        counts = tuple(int(item.get("activation_count", 0)) for item in items)
        return RoutePool(routes=routes, activation_count=counts)
    except (KeyError, TypeError) as e:
        raise ArtifactError(f"Route pool data is missing field {e}") from e
    except RouteGenError as e:
        raise ArtifactError(f"Invalid route pool: {e}") from e


def save_pool(path: Path | str, pool: RoutePool) -> Path:
    return write_json(path, pool_to_dict(pool))


def load_pool(path: Path | str, instance: Instance) -> RoutePool:
    return pool_from_dict(read_json(path), instance)


def save_plan(path: Path | str, plan: PlanSolution, extra: dict | None = None) -> Path:
    data = plan.to_dict()
    if extra:
        data.update(extra)
    return write_json(path, data)


def load_plan(path: Path | str, instance: Instance) -> PlanSolution:
    return PlanSolution.from_dict(read_json(path), instance)


def save_grid(path: Path | str, grid: DensityGrid) -> Path:
    return write_json(path, grid.to_dict())


def load_grid(path: Path | str) -> DensityGrid:
    try:
        return DensityGrid.from_dict(read_json(path))
    except InstanceGenError as e:
        raise ArtifactError(f"{path}: {e}") from e
