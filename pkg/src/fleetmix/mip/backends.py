"""
Solver backends for ``MipModel``.

- ``internal``: best-bound branch-and-bound over the binaries with LP
  relaxations solved by HiGHS dual simplex (``scipy.optimize.linprog``).
- ``highs``: the HiGHS MIP solver through ``scipy.optimize.milp``.
- ``mps_external``: writes an MPS file and runs a configured solver command
  that must leave a ``name value`` solution file behind.
"""

import heapq
import itertools
import logging
import math
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from django.conf import settings
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import (
    FEASIBILITY_TOL,
    INTEGRALITY_TOL,
    MipError,
    MipModel,
    MipSolution,
    SolveLimits,
    SolveStatus,
)
from .mps import export_mps, mps_names

logger = logging.getLogger(__name__)


class ExternalSolverError(MipError):
    """The external solver could not be run or produced no usable output."""

    pass


class Backend(Enum):
    INTERNAL = "internal"
    HIGHS = "highs"
    MPS_EXTERNAL = "mps_external"


def _get_external_command() -> str:
    return getattr(settings, "FLEETMIX_EXTERNAL_SOLVER", "")


def _get_external_timeout() -> float:
    return float(getattr(settings, "FLEETMIX_EXTERNAL_TIMEOUT", 3600))


def solve(
    model: MipModel,
    backend: Backend | str = Backend.INTERNAL,
    limits: SolveLimits | None = None,
) -> MipSolution:
    """Solve ``model`` (minimization) with the chosen backend."""
    backend = Backend(backend)
    limits = limits or SolveLimits()
    started = time.monotonic()
    if backend is Backend.INTERNAL:
        solution = BranchAndBound(model, limits).run()
    elif backend is Backend.HIGHS:
        solution = solve_highs(model, limits)
    else:
        solution = solve_external(model, limits)
    logger.info(
        f"{model.name} [{backend.value}]: status={solution.status.value} "
        f"objective={solution.objective:.6f} bound={solution.best_bound:.6f} "
        f"nodes={solution.node_count} in {time.monotonic() - started:.2f}s"
    )
    return solution


@dataclass(frozen=True)
class LpResult:
    status: SolveStatus
    x: np.ndarray | None
    objective: float


def solve_lp(model: MipModel, lower: np.ndarray, upper: np.ndarray, time_limit: float | None = None) -> LpResult:
    """LP relaxation of ``model`` under the given variable bounds."""
    arrays = model.arrays
    if model.n_vars == 0:
        return LpResult(SolveStatus.OPTIMAL, np.zeros(0), model.objective_constant)
    options = {
        "primal_feasibility_tolerance": FEASIBILITY_TOL,
        "dual_feasibility_tolerance": FEASIBILITY_TOL,
    }
    if time_limit is not None:
        options["time_limit"] = max(time_limit, 1e-3)
    result = linprog(
        arrays.c,
        A_ub=arrays.a_ub,
        b_ub=arrays.b_ub,
        A_eq=arrays.a_eq,
        b_eq=arrays.b_eq,
        bounds=np.column_stack([lower, upper]),
        method="highs-ds",
        options=options,
    )
    if result.status == 0:
        return LpResult(SolveStatus.OPTIMAL, result.x, float(result.fun) + model.objective_constant)
    if result.status == 2:
        return LpResult(SolveStatus.INFEASIBLE, None, math.inf)
    if result.status == 1:
        return LpResult(SolveStatus.TIME_LIMIT, None, math.inf)
    raise MipError(f"LP relaxation of {model.name} failed: {result.message}")


@dataclass
class _Node:
    bound: float
    neg_depth: int
    seq: int
    lower: np.ndarray = None  # type: ignore[assignment]
    upper: np.ndarray = None  # type: ignore[assignment]
    x: np.ndarray = None  # type: ignore[assignment]

    def __lt__(self, other: "_Node") -> bool:
        return (self.bound, self.neg_depth, self.seq) < (other.bound, other.neg_depth, other.seq)


class BranchAndBound:
    """
    Best-bound branch-and-bound with most-fractional branching.

    Ties in fractionality go to the lowest variable index; ties in bound
    go to the deeper node.
    """

    def __init__(self, model: MipModel, limits: SolveLimits):
        self.model = model
        self.limits = limits
        self.binaries = model.arrays.binary_indices
        self.counter = itertools.count()
        self.incumbent: np.ndarray | None = None
        self.incumbent_value = math.inf
        self.node_count = 0
        self.started = 0.0

    def _remaining(self) -> float | None:
        if self.limits.time_limit is None:
            return None
        return self.limits.time_limit - (time.monotonic() - self.started)

    def _timed_out(self) -> bool:
        remaining = self._remaining()
        return remaining is not None and remaining <= 0

    def _cutoff(self) -> float:
        if not math.isfinite(self.incumbent_value):
            return math.inf
        return self.incumbent_value - max(FEASIBILITY_TOL, self.limits.gap * abs(self.incumbent_value))

    def _fractional(self, x: np.ndarray) -> int | None:
        if len(self.binaries) == 0:
            return None
        values = x[self.binaries]
        frac = np.abs(values - np.rint(values))
        if frac.max() <= INTEGRALITY_TOL:
            return None
        # most fractional: closest to one half; argmin keeps the lowest index
        distance = np.where(frac > INTEGRALITY_TOL, np.abs(values - np.floor(values) - 0.5), np.inf)
        return int(self.binaries[int(np.argmin(distance))])

    def _accept(self, x: np.ndarray, value: float) -> None:
        if value < self.incumbent_value - 1e-12:
            x = x.copy()
            x[self.binaries] = np.rint(x[self.binaries])
            self.incumbent = x
            self.incumbent_value = value
            logger.debug(f"B&B incumbent {value:.6f} after {self.node_count} nodes")

    def _rounding_heuristic(self, x: np.ndarray) -> None:
        """Fix binaries to rounded LP values (then to floor) and re-solve the LP."""
        arrays = self.model.arrays
        for rounded in (np.rint(x[self.binaries]), np.floor(x[self.binaries] + INTEGRALITY_TOL)):
            lower, upper = arrays.lower.copy(), arrays.upper.copy()
            lower[self.binaries] = np.clip(rounded, arrays.lower[self.binaries], arrays.upper[self.binaries])
            upper[self.binaries] = lower[self.binaries]
            lp = solve_lp(self.model, lower, upper, self._remaining())
            if lp.status is SolveStatus.OPTIMAL:
                self._accept(lp.x, lp.objective)
                return

    def _child(self, parent: _Node, var: int, value: float) -> _Node | None:
        lower, upper = parent.lower.copy(), parent.upper.copy()
        lower[var] = upper[var] = value
        lp = solve_lp(self.model, lower, upper, self._remaining())
        self.node_count += 1
        if lp.status is SolveStatus.TIME_LIMIT:
            raise TimeoutError
        if lp.status is SolveStatus.INFEASIBLE or lp.objective >= self._cutoff():
            return None
        return _Node(lp.objective, parent.neg_depth - 1, next(self.counter), lower, upper, lp.x)

    def _result(self, status: SolveStatus, bound: float, root_bound: float) -> MipSolution:
        return MipSolution.create(
            self.incumbent,
            self.incumbent_value,
            bound,
            status,
            self.model.n_vars,
            node_count=self.node_count,
            root_bound=root_bound,
        )

    def run(self) -> MipSolution:
        self.started = time.monotonic()
        arrays = self.model.arrays
        root = solve_lp(self.model, arrays.lower.copy(), arrays.upper.copy(), self._remaining())
        self.node_count = 1
        if root.status is SolveStatus.INFEASIBLE:
            return self._result(SolveStatus.INFEASIBLE, math.inf, math.inf)
        if root.status is SolveStatus.TIME_LIMIT:
            return self._result(SolveStatus.TIME_LIMIT, -math.inf, -math.inf)
        root_bound = root.objective
        if self._fractional(root.x) is None:
            self._accept(root.x, root.objective)
            return self._result(SolveStatus.OPTIMAL, root_bound, root_bound)
        self._rounding_heuristic(root.x)

        heap: list[_Node] = [_Node(root.objective, 0, next(self.counter), arrays.lower.copy(), arrays.upper.copy(), root.x)]
        status = SolveStatus.OPTIMAL
        while heap:
            if self._timed_out():
                status = SolveStatus.TIME_LIMIT
                break
            if self.limits.node_limit is not None and self.node_count >= self.limits.node_limit:
                status = SolveStatus.FEASIBLE
                break
            node = heapq.heappop(heap)
            if node.bound >= self._cutoff():
                continue
            var = self._fractional(node.x)
            if var is None:
                self._accept(node.x, node.bound)
                continue
            try:
                children = [self._child(node, var, value) for value in (0.0, 1.0)]
            except TimeoutError:
                heapq.heappush(heap, node)  # still open
                status = SolveStatus.TIME_LIMIT
                break
            for child in children:
                if child is None:
                    continue
                if self._fractional(child.x) is None:
                    self._accept(child.x, child.bound)
                else:
                    heapq.heappush(heap, child)
        open_bounds = [n.bound for n in heap if n.bound < self._cutoff()]
        if status is SolveStatus.OPTIMAL or not open_bounds:
            # search exhausted: the incumbent is optimal within the gap
            bound = self.incumbent_value
            status = SolveStatus.OPTIMAL if self.incumbent is not None else SolveStatus.INFEASIBLE
        else:
            bound = min(open_bounds)
            if status is SolveStatus.FEASIBLE and self.incumbent is None:
                status = SolveStatus.TIME_LIMIT
        return self._result(status, bound, root_bound)


def solve_highs(model: MipModel, limits: SolveLimits) -> MipSolution:
    arrays = model.arrays
    if model.n_vars == 0:
        return MipSolution.create(np.zeros(0), model.objective_constant, model.objective_constant, SolveStatus.OPTIMAL, 0)
    options: dict = {"mip_rel_gap": limits.gap, "disp": False}
    if limits.time_limit is not None:
        options["time_limit"] = limits.time_limit
    if limits.node_limit is not None:
        options["node_limit"] = limits.node_limit
    constraints = None
    if arrays.a.shape[0]:
        constraints = LinearConstraint(arrays.a, arrays.row_lower, arrays.row_upper)
    result = milp(
        arrays.c,
        constraints=constraints,
        integrality=arrays.integrality,
        bounds=Bounds(arrays.lower, arrays.upper),
        options=options,
    )
    node_count = int(getattr(result, "mip_node_count", 0) or 0)
    if result.status == 2:
        return MipSolution.create(None, math.inf, math.inf, SolveStatus.INFEASIBLE, model.n_vars, node_count=node_count)
    if result.x is None:
        return MipSolution.create(None, math.inf, -math.inf, SolveStatus.TIME_LIMIT, model.n_vars, node_count=node_count)
    objective = float(result.fun) + model.objective_constant
    dual_bound = getattr(result, "mip_dual_bound", None)
    bound = objective if dual_bound is None else float(dual_bound) + model.objective_constant
    if result.status == 0:
        status = SolveStatus.OPTIMAL
    elif result.status == 1:
        status = SolveStatus.TIME_LIMIT if limits.time_limit is not None else SolveStatus.FEASIBLE
    else:
        raise MipError(f"HiGHS failed on {model.name}: {result.message}")
    values = np.asarray(result.x, dtype=float)
    values[arrays.binary_indices] = np.rint(values[arrays.binary_indices])
    return MipSolution.create(values, objective, bound, status, model.n_vars, node_count=node_count)


def parse_solution_file(
    text: str, model: MipModel, names: list[str] | None = None
) -> tuple[np.ndarray, dict[str, str]]:
    """
    Read ``name value`` lines; ``@key value`` lines carry status metadata.

    ``names`` are the column names as written to the MPS file, when they
    differ from the model names.
    """
    index = {name: k for k, name in enumerate(names)} if names else model.var_index
    values = np.zeros(model.n_vars)
    meta: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(("#", "*")):
            continue
        parts = line.split()
        if parts[0].startswith("@"):
            meta[parts[0][1:].lower()] = " ".join(parts[1:])
            continue
        if len(parts) < 2:
            continue
        idx = index.get(parts[0])
        if idx is None:
            continue
        try:
            values[idx] = float(parts[1])
        except ValueError as e:
            raise ExternalSolverError(f"Bad value for {parts[0]}: {parts[1]}") from e
    return values, meta


def solve_external(model: MipModel, limits: SolveLimits, command: str | None = None) -> MipSolution:
    template = command or _get_external_command()
    if not template:
        raise ExternalSolverError("No external solver configured (set FLEETMIX_EXTERNAL_SOLVER)")
    with tempfile.TemporaryDirectory(prefix="fleetmix-") as tmp:
        mps_path = Path(tmp) / "model.mps"
        solution_path = Path(tmp) / "solution.txt"
        mps_path.write_text(export_mps(model))
        names, _, _ = mps_names(model)
        args = shlex.split(
            template.format(
                mps=mps_path,
                solution=solution_path,
                time_limit=limits.time_limit if limits.time_limit is not None else "",
                gap=limits.gap,
            )
        )
        timeout = limits.time_limit * 2 + 60 if limits.time_limit else _get_external_timeout()
        try:
            result = subprocess.run(args, capture_output=True, text=True, timeout=timeout)
        except FileNotFoundError:
            raise ExternalSolverError(f"External solver command not found: {args[0]}") from None
        except subprocess.TimeoutExpired:
            logger.error(f"External solver timed out after {timeout}s: {args[0]}")
            return MipSolution.create(None, math.inf, -math.inf, SolveStatus.TIME_LIMIT, model.n_vars)
        if result.returncode != 0:
            raise ExternalSolverError(
                f"External solver {args[0]} exited with {result.returncode}: {result.stderr.strip()}"
            )
        if not solution_path.exists():
            raise ExternalSolverError(f"External solver {args[0]} wrote no solution file")
        values, meta = parse_solution_file(solution_path.read_text(), model, names)

    try:
        status = SolveStatus(meta.get("status", SolveStatus.OPTIMAL.value))
    except ValueError:
        raise ExternalSolverError(f"Unknown solver status {meta['status']!r}") from None
    if status is SolveStatus.INFEASIBLE:
        return MipSolution.create(None, math.inf, math.inf, status, model.n_vars)
    objective = float(meta["objective"]) if "objective" in meta else model.objective_value(values)
    bound = float(meta["bound"]) if "bound" in meta else objective
    return MipSolution.create(values, objective, bound, status, model.n_vars)
