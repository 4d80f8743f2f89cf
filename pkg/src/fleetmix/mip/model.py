"""
Solver-agnostic MILP container.

Models are assembled with ``ModelBuilder`` and frozen into ``MipModel``;
minimization only. Backends consume the sparse array form from
``MipModel.arrays``.
"""

import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix, vstack

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
INTEGRALITY_TOL = 1e-6
DEFAULT_GAP = 1e-6


class MipError(Exception):
    """Base exception for model building and solving errors."""

    pass


class ModelBuildError(MipError):
    """The model could not be assembled from its inputs."""

    pass


class VarKind(Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


class Sense(Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time_limit"


def vname(prefix: str, *parts: Any) -> str:
    """Variable/constraint name from a prefix and index parts, e.g. ``x_0_3_CM``."""
    return "_".join([prefix, *(str(part) for part in parts)])


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind = VarKind.CONTINUOUS
    lower: float = 0.0
    upper: float = math.inf

    @property
    def is_binary(self) -> bool:
        return self.kind is VarKind.BINARY


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[int, float], ...]
    sense: Sense
    rhs: float

    def activity(self, values: np.ndarray) -> float:
        return float(sum(coef * values[idx] for idx, coef in self.terms))

    def violation(self, values: np.ndarray) -> float:
        lhs = self.activity(values)
        if self.sense is Sense.LE:
            return max(0.0, lhs - self.rhs)
        if self.sense is Sense.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class LinearArrays:
    """Row form ``row_lower <= A x <= row_upper`` plus the linprog ub/eq split."""

    c: np.ndarray
    a: csr_matrix
    row_lower: np.ndarray
    row_upper: np.ndarray
    a_ub: csr_matrix | None
    b_ub: np.ndarray | None
    a_eq: csr_matrix | None
    b_eq: np.ndarray | None
    lower: np.ndarray
    upper: np.ndarray
    integrality: np.ndarray

    @property
    def binary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.integrality)


@dataclass(frozen=True, eq=False)
class MipModel:
    name: str
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[float, ...]
    objective_constant: float = 0.0
    kind: str = "generic"
    groups: Mapping[str, tuple[int, ...]] = field(default_factory=dict)
    context: Any = None

    def __post_init__(self):
        if len(self.objective) != len(self.variables):
            raise ModelBuildError("Objective length does not match the variable count")
        n = len(self.variables)
        for con in self.constraints:
            for idx, _ in con.terms:
                if not 0 <= idx < n:
                    raise ModelBuildError(f"Constraint {con.name} references unknown variable {idx}")
        for var in self.variables:
            if var.is_binary and (var.lower < 0 or var.upper > 1 or var.lower > var.upper):
                raise ModelBuildError(f"Binary {var.name} has bounds outside [0, 1]")

    @cached_property
    def var_index(self) -> dict[str, int]:
        index = {var.name: k for k, var in enumerate(self.variables)}
        if len(index) != len(self.variables):
            raise ModelBuildError(f"Duplicate variable names in model {self.name}")
        return index

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_binaries(self) -> int:
        return sum(1 for var in self.variables if var.is_binary)

    def index(self, name: str) -> int:
        return self.var_index[name]

    def objective_value(self, values: np.ndarray) -> float:
        return float(np.dot(self.objective, values)) + self.objective_constant

    def max_violation(self, values: np.ndarray) -> float:
        worst = 0.0
        for con in self.constraints:
            worst = max(worst, con.violation(values))
        for k, var in enumerate(self.variables):
            worst = max(worst, var.lower - values[k], values[k] - var.upper)
        return worst

    @cached_property
    def arrays(self) -> LinearArrays:
        n, m = self.n_vars, len(self.constraints)
        rows, cols, vals = [], [], []
        row_lower = np.full(m, -np.inf)
        row_upper = np.full(m, np.inf)
        for r, con in enumerate(self.constraints):
            for idx, coef in con.terms:
                rows.append(r)
                cols.append(idx)
                vals.append(coef)
            if con.sense in (Sense.LE, Sense.EQ):
                row_upper[r] = con.rhs
            if con.sense in (Sense.GE, Sense.EQ):
                row_lower[r] = con.rhs
        a = coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
        eq_rows = np.array([r for r, c in enumerate(self.constraints) if c.sense is Sense.EQ], dtype=int)
        le_rows = np.array([r for r, c in enumerate(self.constraints) if c.sense is Sense.LE], dtype=int)
        ge_rows = np.array([r for r, c in enumerate(self.constraints) if c.sense is Sense.GE], dtype=int)
        a_ub = b_ub = a_eq = b_eq = None
        if len(le_rows) or len(ge_rows):
            a_ub = vstack([a[le_rows], -a[ge_rows]]).tocsr()
            b_ub = np.concatenate([row_upper[le_rows], -row_lower[ge_rows]])
        if len(eq_rows):
            a_eq = a[eq_rows]
            b_eq = row_upper[eq_rows]
        return LinearArrays(
            c=np.array(self.objective, dtype=float),
            a=a,
            row_lower=row_lower,
            row_upper=row_upper,
            a_ub=a_ub,
            b_ub=b_ub,
            a_eq=a_eq,
            b_eq=b_eq,
            lower=np.array([v.lower for v in self.variables], dtype=float),
            upper=np.array([v.upper for v in self.variables], dtype=float),
            integrality=np.array([1 if v.is_binary else 0 for v in self.variables], dtype=int),
        )

    def with_changes(
        self,
        bounds: Mapping[int, tuple[float, float]] | None = None,
        constraints: Iterable[Constraint] = (),
        name: str | None = None,
    ) -> "MipModel":
        """Copy with replaced variable bounds and appended constraints."""
        variables = list(self.variables)
        for idx, (lower, upper) in (bounds or {}).items():
            variables[idx] = replace(variables[idx], lower=lower, upper=upper)
        return replace(
            self,
            name=name or self.name,
            variables=tuple(variables),
            constraints=self.constraints + tuple(constraints),
        )

    def describe(self) -> str:
        return (
            f"{self.name}: {self.n_vars} variables ({self.n_binaries} binary), "
            f"{len(self.constraints)} constraints"
        )


class ModelBuilder:
    """Incremental model assembly with unique names."""

    def __init__(self, name: str, kind: str = "generic", context: Any = None):
        self.name = name
        self.kind = kind
        self.context = context
        self.variables: list[Variable] = []
        self.objective: list[float] = []
        self.constraints: list[Constraint] = []
        self.constant = 0.0
        self.groups: dict[str, list[int]] = {}
        self._names: dict[str, int] = {}
        self._constraint_names: set[str] = set()

    def add_var(
        self,
        name: str,
        kind: VarKind = VarKind.CONTINUOUS,
        lower: float = 0.0,
        upper: float = math.inf,
        obj: float = 0.0,
        group: str | None = None,
    ) -> int:
        if name in self._names:
            raise ModelBuildError(f"Duplicate variable name {name}")
        if kind is VarKind.BINARY:
            lower, upper = max(lower, 0.0), min(upper, 1.0)
        idx = len(self.variables)
        self.variables.append(Variable(name, kind, lower, upper))
        self.objective.append(float(obj))
        self._names[name] = idx
        if group is not None:
            self.groups.setdefault(group, []).append(idx)
        return idx

    def add_constraint(
        self, name: str, terms: Iterable[tuple[int, float]], sense: Sense, rhs: float
    ) -> Constraint | None:
        if name in self._constraint_names:
            raise ModelBuildError(f"Duplicate constraint name {name}")
        merged: dict[int, float] = {}
        for idx, coef in terms:
            merged[idx] = merged.get(idx, 0.0) + float(coef)
        cleaned = tuple((idx, coef) for idx, coef in sorted(merged.items()) if coef != 0.0)
        if not cleaned:
            trivially_ok = (
                (sense is Sense.LE and rhs >= -FEASIBILITY_TOL)
                or (sense is Sense.GE and rhs <= FEASIBILITY_TOL)
                or (sense is Sense.EQ and abs(rhs) <= FEASIBILITY_TOL)
            )
            if not trivially_ok:
                raise ModelBuildError(f"Constraint {name} has no terms and cannot hold")
            return None
        constraint = Constraint(name, cleaned, sense, float(rhs))
        self.constraints.append(constraint)
        self._constraint_names.add(name)
        return constraint

    def build(self) -> MipModel:
        model = MipModel(
            name=self.name,
            variables=tuple(self.variables),
            constraints=tuple(self.constraints),
            objective=tuple(self.objective),
            objective_constant=self.constant,
            kind=self.kind,
            groups={key: tuple(members) for key, members in self.groups.items()},
            context=self.context,
        )
        logger.debug(f"Built {model.describe()}")
        return model


@dataclass(frozen=True)
class SolveLimits:
    time_limit: float | None = None
    gap: float = DEFAULT_GAP
    node_limit: int | None = None


@dataclass(frozen=True, eq=False)
class MipSolution:
    values: np.ndarray
    objective: float
    best_bound: float
    status: SolveStatus
    gap: float
    node_count: int = 0
    root_bound: float = -math.inf
    message: str = ""

    @classmethod
    def create(
        cls,
        values: np.ndarray | None,
        objective: float,
        best_bound: float,
        status: SolveStatus,
        n_vars: int,
        **extra,
    ) -> "MipSolution":
        if values is None:
            values = np.zeros(n_vars)
        if math.isfinite(objective) and math.isfinite(best_bound):
            best_bound = min(best_bound, objective)
            gap = (objective - best_bound) / max(abs(objective), 1e-9)
        else:
            gap = math.inf
        return cls(
            values=np.asarray(values, dtype=float),
            objective=objective,
            best_bound=best_bound,
            status=status,
            gap=gap,
            **extra,
        )

    @property
    def has_solution(self) -> bool:
        return self.status is not SolveStatus.INFEASIBLE and math.isfinite(self.objective)

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def value(self, model: MipModel, name: str) -> float:
        return float(self.values[model.index(name)])
