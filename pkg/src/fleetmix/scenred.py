"""
Scenario reduction by transportation distance.

The distance between a scenario set and a kept subset is the optimal
transport cost of moving every deleted scenario's probability to its
nearest kept scenario (Euclidean norm on demand vectors). Fast Forward
Selection grows the kept set greedily.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.spatial.distance import cdist

from .domain import ScenarioSet

logger = logging.getLogger(__name__)


class ScenarioReductionError(ValueError):
    """Base exception for scenario reduction errors."""

    pass


@dataclass(frozen=True)
class SelectionStep:
    picked: int
    distance: float


@dataclass(frozen=True)
class ReducedTree:
    """Kept scenarios (ascending original index) with redistributed probabilities."""

    kept_ids: tuple[int, ...]
    new_probs: tuple[float, ...]
    distance: float
    assignment: dict[int, int]
    steps: tuple[SelectionStep, ...] = field(default=())

    def apply(self, scenarios: ScenarioSet) -> ScenarioSet:
        return scenarios.subset(list(self.kept_ids), np.array(self.new_probs))

    def to_dict(self) -> dict:
        return {
            "kept_ids": list(self.kept_ids),
            "new_probs": list(self.new_probs),
            "distance": self.distance,
            "assignment": {str(k): v for k, v in sorted(self.assignment.items())},
            "steps": [{"picked": s.picked, "distance": s.distance} for s in self.steps],
        }


def scenario_distances(scenarios: ScenarioSet) -> np.ndarray:
    return cdist(scenarios.demands, scenarios.demands, metric="euclidean")


def _validated_kept(scenarios: ScenarioSet, kept) -> list[int]:
    kept_ids = sorted(set(int(s) for s in kept))
    if not kept_ids:
        raise ScenarioReductionError("The kept scenario set cannot be empty")
    if kept_ids[0] < 0 or kept_ids[-1] >= scenarios.n_scenarios:
        raise ScenarioReductionError(
            f"Kept ids {kept_ids} out of range for {scenarios.n_scenarios} scenarios"
        )
    return kept_ids


def reduction_distance(
    scenarios: ScenarioSet, kept, distances: np.ndarray | None = None
) -> tuple[float, ReducedTree]:
    """
    Transportation distance to ``kept`` and the redistributed tree.

    Each deleted scenario hands its probability to the nearest kept one;
    ties go to the lowest kept index.
    """
    kept_ids = _validated_kept(scenarios, kept)
    if distances is None:
        distances = scenario_distances(scenarios)
    probs = scenarios.probabilities
    kept_set = set(kept_ids)
    new_probs = {s: float(probs[s]) for s in kept_ids}
    assignment: dict[int, int] = {}
    total = 0.0
    to_kept = distances[:, kept_ids]
    for s in range(scenarios.n_scenarios):
        if s in kept_set:
            continue
        # argmin returns the first minimum, i.e. the lowest kept index
        nearest = kept_ids[int(np.argmin(to_kept[s]))]
        assignment[s] = nearest
        new_probs[nearest] += float(probs[s])
        total += float(probs[s]) * float(distances[s, nearest])
    tree = ReducedTree(
        kept_ids=tuple(kept_ids),
        new_probs=tuple(new_probs[s] for s in kept_ids),
        distance=total,
        assignment=assignment,
    )
    return total, tree


def fast_forward_select(scenarios: ScenarioSet, k: int) -> ReducedTree:
    """Greedily add the scenario that minimizes the resulting distance, ``k`` times."""
    n = scenarios.n_scenarios
    if not 1 <= k <= n:
        raise ScenarioReductionError(f"k must lie in [1, {n}], got {k}")
    distances = scenario_distances(scenarios)
    probs = scenarios.probabilities
    nearest = np.full(n, np.inf)
    selected: list[int] = []
    steps: list[SelectionStep] = []
    for _ in range(k):
        # cost of each candidate: every scenario moves to the closer of its
        # current nearest selected scenario and the candidate
        candidate_costs = probs @ np.minimum(nearest[:, None], distances)
        if selected:
            candidate_costs[selected] = np.inf
        picked = int(np.argmin(candidate_costs))
        selected.append(picked)
        nearest = np.minimum(nearest, distances[:, picked])
        steps.append(SelectionStep(picked=picked, distance=float(candidate_costs[picked])))
        logger.debug(f"FFS picked scenario {picked} (distance {candidate_costs[picked]:.6g})")
    _, tree = reduction_distance(scenarios, selected, distances)
    logger.info(f"Reduced {n} scenarios to {k} (distance {tree.distance:.6g})")
    return ReducedTree(
        kept_ids=tree.kept_ids,
        new_probs=tree.new_probs,
        distance=tree.distance,
        assignment=tree.assignment,
        steps=tuple(steps),
    )


def transport_lp_oracle(scenarios: ScenarioSet, kept, target_probs=None) -> float:
    """
    Solve the transportation LP from the original distribution to the kept
    scenarios exactly.

    With ``target_probs`` the kept marginals are fixed; otherwise they are
    free variables summing to one.
    """
    kept_ids = _validated_kept(scenarios, kept)
    n, m = scenarios.n_scenarios, len(kept_ids)
    cost = scenario_distances(scenarios)[:, kept_ids].reshape(-1)
    free_targets = target_probs is None
    n_vars = n * m + (m if free_targets else 0)

    rows, cols, vals = [], [], []
    rhs = []
    # every original scenario ships its whole probability
    for s in range(n):
        for t in range(m):
            rows.append(s)
            cols.append(s * m + t)
            vals.append(1.0)
        rhs.append(float(scenarios.probabilities[s]))
    # every kept scenario receives its target mass
    for t in range(m):
        row = n + t
        for s in range(n):
            rows.append(row)
            cols.append(s * m + t)
            vals.append(1.0)
        if free_targets:
            rows.append(row)
            cols.append(n * m + t)
            vals.append(-1.0)
            rhs.append(0.0)
        else:
            rhs.append(float(target_probs[t]))
    a_eq = coo_matrix((vals, (rows, cols)), shape=(n + m, n_vars)).tocsr()
    c = np.concatenate([cost, np.zeros(n_vars - n * m)])
    result = linprog(
        c,
        A_eq=a_eq,
        b_eq=np.array(rhs),
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if result.status != 0:
        raise ScenarioReductionError(f"Transportation LP failed: {result.message}")
    return float(result.fun)
