"""
Kernel Search over the path-based model.

The kernel starts as the elementary routes. The remaining pool routes are
shuffled into buckets; each bucket is solved together with the kernel as a
restricted path model, and routes the restricted optimum activates join the
kernel. Two passes over freshly partitioned buckets are made by default.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .domain import CostParams, Instance, Neighborhoods, ScenarioSet
from .instancegen import make_rng
from .mip import Backend, PlanSolution, SolveLimits, build_path_model, decode_solution, solve
from .mip.backends import solve_lp
from .routegen import RoutePool

logger = logging.getLogger(__name__)

KERNEL_STREAM = 2


class KernelSearchError(ValueError):
    """Kernel Search cannot run on the given inputs."""

    pass


@dataclass(frozen=True)
class KsConfig:
    bucket_size: int
    t_max: float
    opt_threshold: float = 0.0
    subproblem_time: float | None = None
    seed: int = 0
    cycles: int = 2
    backend: str = Backend.INTERNAL.value
    gap: float = 1e-6
    lp_bound: bool = True

    def __post_init__(self):
        if self.bucket_size < 1:
            raise KernelSearchError(f"bucket_size must be at least 1, got {self.bucket_size}")
        if self.t_max <= 0:
            raise KernelSearchError(f"t_max must be positive, got {self.t_max}")
        if self.cycles < 1:
            raise KernelSearchError(f"cycles must be at least 1, got {self.cycles}")
        if self.opt_threshold < 0:
            raise KernelSearchError("opt_threshold must be non-negative")


@dataclass(frozen=True)
class KsRecord:
    cycle: int
    bucket: int
    kernel_before: int
    kernel_after: int
    subproblem_routes: int
    status: str
    subproblem_objective: float
    incumbent: float
    lower_bound: float
    elapsed: float


@dataclass
class KsTrace:
    records: list[KsRecord] = field(default_factory=list)

    def to_rows(self, with_elapsed: bool = True) -> list[dict]:
        rows = []
        for record in self.records:
            row = asdict(record)
            if not with_elapsed:
                row.pop("elapsed")
            rows.append(row)
        return rows

    @property
    def is_monotone(self) -> bool:
        values = [r.incumbent for r in self.records if math.isfinite(r.incumbent)]
        return all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def partition_buckets(routes: list[int], bucket_size: int, rng: np.random.Generator) -> list[list[int]]:
    """Shuffle and cut into ``len // bucket_size`` full buckets plus a remainder bucket."""
    shuffled = [routes[k] for k in rng.permutation(len(routes))]
    return [shuffled[k : k + bucket_size] for k in range(0, len(shuffled), bucket_size)]


def _relative_gap(incumbent: float, bound: float) -> float:
    if not (math.isfinite(incumbent) and math.isfinite(bound)):
        return math.inf
    return max(0.0, incumbent - bound) / max(abs(incumbent), 1e-9)


def path_lp_bound(
    instance: Instance,
    scenarios: ScenarioSet,
    neighborhoods: Neighborhoods,
    costs: CostParams,
    pool: RoutePool,
    time_limit: float | None = None,
) -> float:
    """
    LP relaxation value of the full path model, a valid lower bound.

    Returns -inf when the LP does not finish within ``time_limit``.
    """
    model = build_path_model(instance, scenarios, neighborhoods, costs, pool)
    arrays = model.arrays
    result = solve_lp(model, arrays.lower.copy(), arrays.upper.copy(), time_limit)
    if result.x is None:
        logger.warning(f"No LP bound for the path model: {result.status.value}")
        return -math.inf
    return result.objective


def kernel_search(
    instance: Instance,
    scenarios: ScenarioSet,
    neighborhoods: Neighborhoods,
    costs: CostParams,
    pool: RoutePool,
    cfg: KsConfig,
) -> tuple[PlanSolution, KsTrace]:
    missing = pool.missing_elementary(instance)
    if missing:
        raise KernelSearchError(f"Route pool lacks elementary routes for nodes {missing}")
    started = time.monotonic()
    rng = make_rng(cfg.seed, KERNEL_STREAM)
    kernel: set[int] = set(pool.elementary_ids)
    trace = KsTrace()
    best: PlanSolution | None = None
    best_value = math.inf
    lower_bound = -math.inf
    if cfg.lp_bound:
        # at most half the budget, the restricted solves need the rest
        lower_bound = path_lp_bound(instance, scenarios, neighborhoods, costs, pool, cfg.t_max / 2)
        logger.info(f"Kernel Search LP bound {lower_bound:.6f}")

    def elapsed() -> float:
        return time.monotonic() - started

    def should_stop() -> bool:
        if elapsed() > cfg.t_max:
            logger.info(f"Kernel Search stops on time after {elapsed():.1f}s")
            return True
        if _relative_gap(best_value, lower_bound) <= cfg.opt_threshold:
            logger.info(f"Kernel Search stops at gap {_relative_gap(best_value, lower_bound):.3g}")
            return True
        return False

    def restricted_solve(cycle: int, bucket_index: int, bucket: list[int], time_limit: float) -> None:
        nonlocal best, best_value, lower_bound
        indices = sorted(kernel.union(bucket))
        subpool = pool.subset(indices)
        model = build_path_model(instance, scenarios, neighborhoods, costs, subpool)
        remaining = max(cfg.t_max - elapsed(), 1e-3)
        raw = solve(model, cfg.backend, SolveLimits(time_limit=min(time_limit, remaining), gap=cfg.gap))
        before = len(kernel)
        if raw.has_solution:
            plan = decode_solution(model, raw, instance, subpool)
            for planned in plan.routes:
                r = pool.index_of(planned.sequence)
                if r is not None:
                    kernel.add(r)
            if raw.objective < best_value - 1e-9:
                best, best_value = plan, raw.objective
                logger.info(f"Kernel Search incumbent {best_value:.6f} (cycle {cycle}, bucket {bucket_index})")
        if len(indices) == len(pool) and math.isfinite(raw.best_bound):
            lower_bound = max(lower_bound, raw.best_bound)
        trace.records.append(
            KsRecord(
                cycle=cycle,
                bucket=bucket_index,
                kernel_before=before,
                kernel_after=len(kernel),
                subproblem_routes=len(indices),
                status=raw.status.value,
                subproblem_objective=raw.objective,
                incumbent=best_value,
                lower_bound=lower_bound,
                elapsed=round(elapsed(), 3),
            )
        )
        logger.debug(
            f"KS cycle {cycle} bucket {bucket_index}: {len(indices)} routes, "
            f"status {raw.status.value}, kernel {before} -> {len(kernel)}"
        )

    outside = [r for r in range(len(pool)) if r not in kernel]
    n_buckets = max(1, math.ceil(len(outside) / cfg.bucket_size))
    subproblem_time = cfg.subproblem_time or cfg.t_max / (2 * n_buckets)
    restricted_solve(0, 0, [], subproblem_time)

    stopped = False
    for cycle in range(1, cfg.cycles + 1):
        if stopped or should_stop():
            break
        outside = [r for r in range(len(pool)) if r not in kernel]
        if not outside:
            break
        buckets = partition_buckets(outside, cfg.bucket_size, rng)
        logger.info(f"Kernel Search cycle {cycle}: kernel {len(kernel)}, {len(buckets)} buckets")
        for k, bucket in enumerate(buckets, start=1):
            if should_stop():
                stopped = True
                break
            restricted_solve(cycle, k, [r for r in bucket if r not in kernel], subproblem_time)

    if best is None:
        raise KernelSearchError("No restricted model produced a solution within the time budget")
    proven = _relative_gap(best_value, lower_bound) <= cfg.gap
    best = replace(best, status="optimal" if proven else "feasible")
    logger.info(
        f"Kernel Search finished: {best_value:.6f}, bound {lower_bound:.6f}, kernel {len(kernel)} routes"
    )
    return best, trace
