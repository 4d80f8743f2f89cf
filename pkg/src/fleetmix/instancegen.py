"""
Instance generation and ingestion.

Synthetic instances sample delivery requests from a hexagonal density grid
and perturb the resulting base demands per scenario. Operational data is
ingested from a CSV of daily parcel counts per location.

All sampling uses numpy's PCG64 generator seeded through ``SeedSequence``;
the algorithm name is recorded in artifact metadata.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .domain import (
    DEPOT,
    SMALL_PROFILE,
    Instance,
    Node,
    ScenarioSet,
    VehicleType,
)

logger = logging.getLogger(__name__)

PRNG_ALGORITHM = "numpy.random.PCG64"
SQRT3 = math.sqrt(3.0)

# SeedSequence spawn keys for the independent generation streams
SAMPLING_STREAM = 0
PERTURBATION_STREAM = 1


class InstanceGenError(ValueError):
    """Base exception for instance generation errors."""

    pass


class IngestError(InstanceGenError):
    """Operational data could not be ingested."""

    pass


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for a (seed, stream...) entropy tuple."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


@dataclass(frozen=True)
class HexCell:
    q: int
    r: int
    x: float
    y: float
    count: int = 0

    @property
    def center(self) -> tuple[float, float]:
        return (self.x, self.y)


def _hex_size(cell_size: float) -> float:
    """Circumradius of a pointy-top hexagon whose flat-to-flat width is ``cell_size``."""
    return cell_size / SQRT3


def hex_center(q: int, r: int, cell_size: float) -> tuple[float, float]:
    size = _hex_size(cell_size)
    return (size * (SQRT3 * q + SQRT3 / 2.0 * r), size * 1.5 * r)


def point_to_axial(points: np.ndarray, cell_size: float) -> np.ndarray:
    """Map (x, y) rows to pointy-top axial (q, r) by cube rounding."""
    size = _hex_size(cell_size)
    x, y = points[:, 0], points[:, 1]
    qf = (SQRT3 / 3.0 * x - y / 3.0) / size
    rf = (2.0 / 3.0 * y) / size
    sf = -qf - rf
    q, r, s = np.rint(qf), np.rint(rf), np.rint(sf)
    dq, dr, ds = np.abs(q - qf), np.abs(r - rf), np.abs(s - sf)
    fix_q = (dq > dr) & (dq > ds)
    fix_r = ~fix_q & (dr > ds)
    q = np.where(fix_q, -r - s, q)
    r = np.where(fix_r, -q - s, r)
    return np.column_stack([q, r]).astype(int)


def aggregate_hex(points, cell_size: float) -> list[HexCell]:
    """
    Count points per hexagonal cell.

    Cells are returned in canonical axial order (by r, then q) with their
    centers; only nonempty cells appear.
    """
    if cell_size <= 0:
        raise InstanceGenError(f"cell_size must be positive, got {cell_size}")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        return []
    axial = point_to_axial(points, cell_size)
    keys, counts = np.unique(axial[:, ::-1], axis=0, return_counts=True)
    cells = []
    for (r, q), count in zip(keys.tolist(), counts.tolist()):
        x, y = hex_center(q, r, cell_size)
        cells.append(HexCell(q=q, r=r, x=x, y=y, count=int(count)))
    return cells


@dataclass(frozen=True)
class DensityCell:
    x: float
    y: float
    weight: float


@dataclass(frozen=True)
class DensityGrid:
    """Demand density over hexagonal cells (cell_size is the flat-to-flat width in km)."""

    cell_size: float
    cells: tuple[DensityCell, ...]

    def __post_init__(self):
        if self.cell_size <= 0:
            raise InstanceGenError("cell_size must be positive")
        if not self.cells:
            raise InstanceGenError("A density grid needs at least one cell")
        weights = self.weights
        if (weights < 0).any() or weights.sum() <= 0:
            raise InstanceGenError("Cell weights must be non-negative and not all zero")

    @property
    def weights(self) -> np.ndarray:
        return np.array([cell.weight for cell in self.cells], dtype=float)

    @classmethod
    def from_dict(cls, data: dict) -> "DensityGrid":
        try:
            cells = tuple(
                DensityCell(x=float(c["x"]), y=float(c["y"]), weight=float(c["weight"]))
                for c in data["cells"]
            )
            return cls(cell_size=float(data["cell_size"]), cells=cells)
        except (KeyError, TypeError) as e:
            raise InstanceGenError(f"Malformed density grid: {e}") from e

    def to_dict(self) -> dict:
        return {
            "cell_size": self.cell_size,
            "cells": [{"x": c.x, "y": c.y, "weight": c.weight} for c in self.cells],
        }

    @classmethod
    def from_points(cls, points, cell_size: float) -> "DensityGrid":
        """Density proportional to the number of sample points per cell."""
        cells = aggregate_hex(points, cell_size)
        return cls(
            cell_size=cell_size,
            cells=tuple(DensityCell(c.x, c.y, float(c.count)) for c in cells),
        )


def synthetic_density_grid(
    radius: float = 3.0,
    cell_size: float = 0.5,
    n_hotspots: int = 3,
    seed: int = 0,
) -> DensityGrid:
    """
    Hexagonal lattice within ``radius`` km of the origin weighted by a
    mixture of Gaussian population hotspots.
    """
    rng = make_rng(seed, SAMPLING_STREAM, 99)
    reach = int(math.ceil(radius / cell_size)) + 1
    centers = []
    for r in range(-reach, reach + 1):
        for q in range(-reach, reach + 1):
            x, y = hex_center(q, r, cell_size)
            if math.hypot(x, y) <= radius:
                centers.append((x, y))
    coords = np.array(centers)
    hotspots = rng.uniform(-radius / 2, radius / 2, size=(n_hotspots, 2))
    spreads = rng.uniform(radius / 6, radius / 3, size=n_hotspots)
    weights = np.zeros(len(coords))
    for (hx, hy), spread in zip(hotspots, spreads):
        sq = (coords[:, 0] - hx) ** 2 + (coords[:, 1] - hy) ** 2
        weights += np.exp(-sq / (2 * spread**2))
    return DensityGrid(
        cell_size=cell_size,
        cells=tuple(DensityCell(float(x), float(y), float(w)) for (x, y), w in zip(coords, weights)),
    )


@dataclass(frozen=True)
class GenConfig:
    n_requests: int
    n_scenarios: int = 1
    noise_low: float = 0.0
    noise_high: float = 4.0
    seed: int = 0
    depot: tuple[float, float] | None = None
    round_demand: bool = False

    def __post_init__(self):
        if self.n_requests < 1 or self.n_scenarios < 1:
            raise InstanceGenError("n_requests and n_scenarios must be positive")
        # equal bounds give a degenerate (deterministic) multiplier
        if not 0 <= self.noise_low <= self.noise_high:
            raise InstanceGenError(
                f"Noise bounds must satisfy 0 <= low <= high, got ({self.noise_low}, {self.noise_high})"
            )


def generate_synthetic(
    grid: DensityGrid,
    cfg: GenConfig,
    vehicle_types: tuple[VehicleType, ...] = SMALL_PROFILE.vehicle_types,
    shift_limit: float = SMALL_PROFILE.shift_limit,
    name: str = "",
) -> Instance:
    """
    Sample ``cfg.n_requests`` requests over the grid cells and turn each
    nonempty cell into a demand node with the request count as base demand.
    """
    rng = make_rng(cfg.seed, SAMPLING_STREAM)
    weights = grid.weights
    counts = rng.multinomial(cfg.n_requests, weights / weights.sum())
    occupied = [(cell, int(count)) for cell, count in zip(grid.cells, counts) if count > 0]
    if cfg.depot is not None:
        depot_x, depot_y = cfg.depot
    else:
        total = sum(count for _, count in occupied)
        depot_x = sum(cell.x * count for cell, count in occupied) / total
        depot_y = sum(cell.y * count for cell, count in occupied) / total
    nodes = [Node(DEPOT, float(depot_x), float(depot_y))]
    for idx, (cell, count) in enumerate(occupied, start=1):
        nodes.append(Node(idx, cell.x, cell.y, float(count)))
    logger.info(
        f"Sampled {cfg.n_requests} requests into {len(occupied)} demand nodes (seed={cfg.seed})"
    )
    return Instance.from_nodes(nodes, vehicle_types, shift_limit=shift_limit, name=name)


def perturb_demand(base: Instance, cfg: GenConfig) -> ScenarioSet:
    """d_is = base_demand_i * rho_is with rho_is ~ U(noise_low, noise_high), equiprobable scenarios."""
    rng = make_rng(cfg.seed, PERTURBATION_STREAM)
    base_demand = base.base_demands
    rho = rng.uniform(cfg.noise_low, cfg.noise_high, size=(cfg.n_scenarios, len(base_demand)))
    demands = base_demand[None, :] * rho
    demands[:, DEPOT] = 0.0
    if cfg.round_demand:
        demands = np.rint(demands)
    return ScenarioSet.uniform(demands)


@dataclass(frozen=True)
class IngestReport:
    n_locations: int
    n_kept: int
    n_days: int
    dropped_days: tuple[str, ...]
    demand_retained: float

    def to_dict(self) -> dict:
        return {
            "n_locations": self.n_locations,
            "n_kept": self.n_kept,
            "n_days": self.n_days,
            "dropped_days": list(self.dropped_days),
            "demand_retained": self.demand_retained,
        }


# identifier columns a wide layout may carry next to x, y and the day columns
ID_COLUMNS = ("id", "customer", "customer_id", "location", "location_id", "name", "address")


def _read_operational_csv(csv_path: Path) -> pd.DataFrame:
    """Read long (day,x,y,parcels) or wide (x,y,<day>...) layouts into long form."""
    try:
        frame = pd.read_csv(csv_path, dtype=str, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise IngestError(f"Cannot parse {csv_path}: {e}") from e
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    # header is line 1, first data row is line 2
    frame["line"] = np.arange(len(frame)) + 2
    if {"x", "y"} - set(frame.columns):
        raise IngestError(f"{csv_path}: columns 'x' and 'y' are required")
    if "day" in frame.columns:
        value_column = next((c for c in ("parcels", "demand", "count") if c in frame.columns), None)
        if value_column is None:
            raise IngestError(f"{csv_path}: long layout needs a 'parcels' column")
        frame = frame.rename(columns={value_column: "parcels"})[["line", "day", "x", "y", "parcels"]]
    else:
        day_columns = [c for c in frame.columns if c not in ("x", "y", "line", *ID_COLUMNS)]
        if not day_columns:
            raise IngestError(f"{csv_path}: no day columns found")
        numeric = frame[day_columns].apply(pd.to_numeric, errors="coerce")
        text_columns = [c for c in day_columns if numeric[c].isna().all() and frame[c].notna().any()]
        if text_columns:
            raise IngestError(
                f"{csv_path}: wide layout allows only x, y, identifier columns {list(ID_COLUMNS)} "
                f"and one numeric column per day; got non-numeric {text_columns}"
            )
        frame = frame.melt(
            id_vars=["line", "x", "y"], value_vars=day_columns, var_name="day", value_name="parcels"
        )
    for column in ("x", "y", "parcels"):
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    bad = frame[frame[["x", "y", "parcels"]].isna().any(axis=1) | (frame["parcels"] < 0)]
    if not bad.empty:
        lines = sorted(set(bad["line"].tolist()))
        raise IngestError(f"{csv_path}: malformed or negative values on line(s) {lines}")
    return frame


def ingest_operational(
    csv_path: str | Path,
    vehicle_types: tuple[VehicleType, ...] = SMALL_PROFILE.vehicle_types,
    shift_limit: float = SMALL_PROFILE.shift_limit,
    cell_size: float | None = None,
    coverage: float = 1.0,
    depot: tuple[float, float] | None = None,
    round_demand: bool = False,
) -> tuple[Instance, ScenarioSet, IngestReport]:
    """
    Build an instance and equiprobable day scenarios from operational counts.

    Locations are optionally merged into hexagonal cells. With ``coverage``
    below 1, only the highest-demand locations needed to reach that share
    of total demand are kept.
    """
    csv_path = Path(csv_path)
    if not 0 < coverage <= 1:
        raise IngestError(f"coverage must lie in (0, 1], got {coverage}")
    frame = _read_operational_csv(csv_path)

    if cell_size is not None:
        axial = point_to_axial(frame[["x", "y"]].to_numpy(), cell_size)
        centers = [hex_center(int(q), int(r), cell_size) for q, r in axial]
        frame["x"] = [c[0] for c in centers]
        frame["y"] = [c[1] for c in centers]

    totals = frame.groupby("day", sort=True)["parcels"].sum()
    dropped = tuple(str(day) for day, total in totals.items() if total <= 0)
    for day in dropped:
        logger.warning(f"Dropping day {day}: zero total demand")
    frame = frame[~frame["day"].isin(dropped)]
    if frame.empty:
        raise IngestError(f"{csv_path}: no day with positive demand")

    table = frame.pivot_table(
        index=["x", "y"], columns="day", values="parcels", aggfunc="sum", fill_value=0.0
    ).sort_index()
    location_totals = table.sum(axis=1).to_numpy()
    grand_total = float(location_totals.sum())
    order = sorted(range(len(table)), key=lambda k: (-location_totals[k], k))
    kept: list[int] = []
    running = 0.0
    for k in order:
        if running >= coverage * grand_total - 1e-12 and kept:
            break
        kept.append(k)
        running += location_totals[k]
    kept.sort()
    table = table.iloc[kept]

    coords = np.array(list(table.index), dtype=float)
    daily = table.to_numpy(dtype=float).T
    if depot is None:
        weights = daily.sum(axis=0)
        depot = (float(coords[:, 0] @ weights / weights.sum()), float(coords[:, 1] @ weights / weights.sum()))
    demands = np.zeros((daily.shape[0], len(coords) + 1))
    demands[:, 1:] = daily
    if round_demand:
        demands = np.rint(demands)
    base = demands.mean(axis=0)
    nodes = [Node(DEPOT, float(depot[0]), float(depot[1]))]
    nodes += [Node(k + 1, float(x), float(y), float(base[k + 1])) for k, (x, y) in enumerate(coords)]
    instance = Instance.from_nodes(nodes, vehicle_types, shift_limit=shift_limit, name=csv_path.stem)
    scenarios = ScenarioSet.uniform(demands)
    report = IngestReport(
        n_locations=len(location_totals),
        n_kept=len(kept),
        n_days=scenarios.n_scenarios,
        dropped_days=dropped,
        demand_retained=running / grand_total if grand_total else 1.0,
    )
    logger.info(
        f"Ingested {report.n_kept}/{report.n_locations} locations over {report.n_days} days "
        f"({report.demand_retained:.1%} of demand retained)"
    )
    return instance, scenarios, report
