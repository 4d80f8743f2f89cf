"""
Candidate route generation for the path-based model.

An adaptive large neighbourhood search (ALNS) solves capacitated VRPs for
many demand realizations and vehicle capacities; routes appearing in the
best solutions are counted and the most frequent ones form the pool.
"""

import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .domain import DEPOT, Instance, ScenarioSet

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 8


class RouteGenError(ValueError):
    """Base exception for route generation errors."""

    pass


class UnroutableNodeError(RouteGenError):
    """A single node's demand exceeds the vehicle capacity."""

    pass


def canonical_sequence(sequence) -> tuple[int, ...]:
    """Orientation-free key: the lexicographically smaller of both directions."""
    forward = tuple(int(i) for i in sequence)
    return min(forward, forward[::-1])


@dataclass(frozen=True)
class Route:
    sequence: tuple[int, ...]
    length: float
    feasible_types: frozenset[str]

    @classmethod
    def build(cls, instance: Instance, sequence, canonical: bool = True) -> "Route":
        seq = canonical_sequence(sequence) if canonical else tuple(int(i) for i in sequence)
        if not seq:
            raise RouteGenError("A route must visit at least one node")
        if len(set(seq)) != len(seq):
            raise RouteGenError(f"Route {seq} repeats a node")
        if DEPOT in seq:
            raise RouteGenError(f"Route {seq} visits the depot in between")
        length = instance.route_length(seq)
        feasible = frozenset(p.id for p in instance.vehicle_types if length <= p.driving_range)
        return cls(sequence=seq, length=length, feasible_types=feasible)

    @property
    def is_elementary(self) -> bool:
        return len(self.sequence) == 1

    def load(self, demand: np.ndarray) -> float:
        return float(sum(demand[i] for i in self.sequence))


@dataclass(frozen=True)
class RoutePool:
    """Deduplicated candidate routes with activation counts."""

    routes: tuple[Route, ...]
    activation_count: tuple[int, ...]
    elementary_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if len(self.routes) != len(self.activation_count):
            raise RouteGenError("Every route needs an activation count")
        keys = [r.sequence for r in self.routes]
        if len(set(keys)) != len(keys):
            raise RouteGenError("Route pool contains duplicate sequences")
        elementary = tuple(k for k, r in enumerate(self.routes) if r.is_elementary)
        object.__setattr__(self, "elementary_ids", elementary)

    def __len__(self) -> int:
        return len(self.routes)

    @cached_property
    def _index(self) -> dict[tuple[int, ...], int]:
        return {r.sequence: k for k, r in enumerate(self.routes)}

    def index_of(self, sequence) -> int | None:
        return self._index.get(canonical_sequence(sequence))

    def routes_for_type(self, type_id: str) -> list[int]:
        return [k for k, r in enumerate(self.routes) if type_id in r.feasible_types]

    def missing_elementary(self, instance: Instance) -> list[int]:
        return [i for i in instance.customers if (i,) not in self._index]

    def subset(self, indices) -> "RoutePool":
        indices = sorted(set(indices))
        return RoutePool(
            routes=tuple(self.routes[k] for k in indices),
            activation_count=tuple(self.activation_count[k] for k in indices),
        )


def split_giant_tour(tour, demands, capacity: float, instance: Instance) -> list[Route]:
    """
    Optimal split of a giant tour into capacity-feasible consecutive
    segments, as a shortest path over the split DAG.
    """
    tour = [int(i) for i in tour]
    if len(set(tour)) != len(tour) or any(i not in instance.customers for i in tour):
        raise RouteGenError(f"Giant tour {tour} is not a permutation of demand nodes")
    if capacity <= 0:
        raise RouteGenError("capacity must be positive")
    demands = np.asarray(demands, dtype=float)
    for i in tour:
        if demands[i] > capacity + 1e-9:
            raise UnroutableNodeError(f"Node {i} demand {demands[i]} exceeds capacity {capacity}")
    dist = instance.distance
    n = len(tour)
    best = [math.inf] * (n + 1)
    pred = [0] * (n + 1)
    best[0] = 0.0
    for start in range(n):
        load = 0.0
        cost = 0.0
        for end in range(start, n):
            node = tour[end]
            load += demands[node]
            if load > capacity + 1e-9:
                break
            if end == start:
                cost = dist[DEPOT, node] + dist[node, DEPOT]
            else:
                prev = tour[end - 1]
                cost += dist[prev, node] + dist[node, DEPOT] - dist[prev, DEPOT]
            if best[start] + cost < best[end + 1] - 1e-12:
                best[end + 1] = best[start] + cost
                pred[end + 1] = start
    routes = []
    end = n
    while end > 0:
        start = pred[end]
        routes.append(Route.build(instance, tour[start:end]))
        end = start
    return routes[::-1]


@dataclass(frozen=True)
class AlnsConfig:
    """ALNS knobs; removal size is a fraction of the customer count."""

    iterations: int = 5000
    min_removal: float = 0.10
    max_removal: float = 0.35
    score_best: float = 33.0
    score_improving: float = 9.0
    score_accepted: float = 1.0
    smoothing: float = 0.8
    segment_length: int = 100
    start_degradation: float = 0.05
    start_acceptance: float = 0.5
    cooling: float = 0.9995
    worst_randomness: float = 3.0
    shaw_randomness: float = 6.0
    candidate_list: int = 3


@dataclass(frozen=True)
class AlnsResult:
    routes: list[Route]
    best_cost: float
    initial_cost: float


class _Alns:
    """Destroy/repair search over a list-of-lists solution."""

    def __init__(self, instance: Instance, demands, capacity: float, rng, config: AlnsConfig):
        self.instance = instance
        self.dist = instance.distance.tolist()
        self.demand = np.asarray(demands, dtype=float).tolist()
        self.capacity = capacity
        self.rng = rng
        self.config = config
        self.customers = list(instance.customers)
        self.destroy_ops = [self.random_removal, self.worst_removal, self.shaw_removal]
        self.repair_ops = [self.greedy_insertion, self.regret_insertion]

    # --- solution helpers

    def route_cost(self, route: list[int]) -> float:
        d = self.dist
        cost = d[DEPOT][route[0]] + d[route[-1]][DEPOT]
        for a, b in zip(route, route[1:]):
            cost += d[a][b]
        return cost

    def cost(self, solution: list[list[int]]) -> float:
        return sum(self.route_cost(r) for r in solution)

    def load(self, route: list[int]) -> float:
        return sum(self.demand[i] for i in route)

    def initial_tour(self) -> list[int]:
        """Randomized nearest-neighbour giant tour from a random first customer."""
        remaining = list(self.customers)
        current = remaining.pop(int(self.rng.integers(len(remaining))))
        tour = [current]
        while remaining:
            remaining.sort(key=lambda j: (self.dist[current][j], j))
            pick = int(self.rng.integers(min(self.config.candidate_list, len(remaining))))
            current = remaining.pop(pick)
            tour.append(current)
        return tour

    # --- destroy operators

    def _removal_count(self) -> int:
        n = len(self.customers)
        low = max(1, int(math.ceil(self.config.min_removal * n)))
        high = max(low, int(math.floor(self.config.max_removal * n)))
        return int(self.rng.integers(low, high + 1))

    @staticmethod
    def _strip(solution: list[list[int]], removed) -> list[list[int]]:
        drop = set(removed)
        routes = [[i for i in route if i not in drop] for route in solution]
        return [route for route in routes if route]

    def random_removal(self, solution, q):
        visited = [i for route in solution for i in route]
        picks = self.rng.choice(len(visited), size=q, replace=False)
        removed = [visited[k] for k in sorted(picks.tolist())]
        return self._strip(solution, removed), removed

    def worst_removal(self, solution, q):
        d = self.dist
        current = [list(route) for route in solution]
        removed = []
        for _ in range(q):
            savings = []
            for route in current:
                for k, node in enumerate(route):
                    prev = route[k - 1] if k > 0 else DEPOT
                    nxt = route[k + 1] if k + 1 < len(route) else DEPOT
                    savings.append((d[prev][node] + d[node][nxt] - d[prev][nxt], node))
            savings.sort(key=lambda item: (-item[0], item[1]))
            index = int(self.rng.random() ** self.config.worst_randomness * len(savings))
            node = savings[index][1]
            removed.append(node)
            current = self._strip(current, [node])
        return current, removed

    def shaw_removal(self, solution, q):
        d = self.dist
        visited = [i for route in solution for i in route]
        removed = [visited[int(self.rng.integers(len(visited)))]]
        remaining = [i for i in visited if i != removed[0]]
        while len(removed) < q:
            anchor = removed[int(self.rng.integers(len(removed)))]
            remaining.sort(key=lambda j: (d[anchor][j], j))
            index = int(self.rng.random() ** self.config.shaw_randomness * len(remaining))
            removed.append(remaining.pop(index))
        return self._strip(solution, removed), removed

    # --- repair operators

    def _insertion_options(self, solution, loads, node) -> list[tuple[float, int, int]]:
        """Cheapest position per route (route -1 opens a new route)."""
        d = self.dist
        options = [(d[DEPOT][node] + d[node][DEPOT], -1, 0)]
        for r, route in enumerate(solution):
            if loads[r] + self.demand[node] > self.capacity + 1e-9:
                continue
            best = None
            stops = [DEPOT, *route, DEPOT]
            for pos in range(len(stops) - 1):
                a, b = stops[pos], stops[pos + 1]
                delta = d[a][node] + d[node][b] - d[a][b]
                if best is None or delta < best[0] - 1e-12:
                    best = (delta, r, pos)
            if best is not None:
                options.append(best)
        options.sort(key=lambda item: (item[0], item[1]))
        return options

    def _insert(self, solution, loads, node, route_index, position):
        if route_index < 0:
            solution.append([node])
            loads.append(self.demand[node])
        else:
            solution[route_index].insert(position, node)
            loads[route_index] += self.demand[node]

    def greedy_insertion(self, solution, removed):
        solution = [list(route) for route in solution]
        loads = [self.load(route) for route in solution]
        pending = list(removed)
        while pending:
            choice = None
            for node in pending:
                delta, r, pos = self._insertion_options(solution, loads, node)[0]
                if choice is None or delta < choice[0] - 1e-12:
                    choice = (delta, node, r, pos)
            _, node, r, pos = choice
            self._insert(solution, loads, node, r, pos)
            pending.remove(node)
        return solution

    def regret_insertion(self, solution, removed):
        solution = [list(route) for route in solution]
        loads = [self.load(route) for route in solution]
        pending = list(removed)
        while pending:
            choice = None
            for node in pending:
                options = self._insertion_options(solution, loads, node)
                regret = options[1][0] - options[0][0] if len(options) > 1 else math.inf
                key = (regret, -options[0][0])
                if choice is None or key > choice[0]:
                    choice = (key, node, options[0][1], options[0][2])
            _, node, r, pos = choice
            self._insert(solution, loads, node, r, pos)
            pending.remove(node)
        return solution

    # --- main loop

    def _select(self, weights: np.ndarray) -> int:
        return int(self.rng.choice(len(weights), p=weights / weights.sum()))

    def run(self, iterations: int) -> tuple[list[list[int]], float, float]:
        cfg = self.config
        tour = self.initial_tour()
        initial = [list(r.sequence) for r in split_giant_tour(tour, self.demand, self.capacity, self.instance)]
        initial_cost = self.cost(initial)
        current, current_cost = initial, initial_cost
        best, best_cost = initial, initial_cost
        if len(self.customers) < 2:
            return best, best_cost, initial_cost

        temperature = max(
            cfg.start_degradation * initial_cost / math.log(1.0 / cfg.start_acceptance), 1e-9
        )
        destroy_weights = np.ones(len(self.destroy_ops))
        repair_weights = np.ones(len(self.repair_ops))
        destroy_scores = np.zeros_like(destroy_weights)
        repair_scores = np.zeros_like(repair_weights)
        destroy_uses = np.zeros_like(destroy_weights)
        repair_uses = np.zeros_like(repair_weights)

        for iteration in range(1, iterations + 1):
            d_op = self._select(destroy_weights)
            r_op = self._select(repair_weights)
            partial, removed = self.destroy_ops[d_op](current, self._removal_count())
            candidate = self.repair_ops[r_op](partial, removed)
            candidate_cost = self.cost(candidate)

            score = 0.0
            if candidate_cost < best_cost - 1e-9:
                best, best_cost = candidate, candidate_cost
                current, current_cost = candidate, candidate_cost
                score = cfg.score_best
            elif candidate_cost < current_cost - 1e-9:
                current, current_cost = candidate, candidate_cost
                score = cfg.score_improving
            elif self.rng.random() < math.exp(-(candidate_cost - current_cost) / temperature):
                current, current_cost = candidate, candidate_cost
                score = cfg.score_accepted
            destroy_scores[d_op] += score
            repair_scores[r_op] += score
            destroy_uses[d_op] += 1
            repair_uses[r_op] += 1
            temperature *= cfg.cooling

            if iteration % cfg.segment_length == 0:
                for weights, scores, uses in (
                    (destroy_weights, destroy_scores, destroy_uses),
                    (repair_weights, repair_scores, repair_uses),
                ):
                    used = uses > 0
                    weights[used] = cfg.smoothing * weights[used] + (1 - cfg.smoothing) * (
                        scores[used] / uses[used]
                    )
                    np.maximum(weights, 1e-3, out=weights)
                    scores[:] = 0
                    uses[:] = 0
                logger.debug(
                    f"ALNS iteration {iteration}: best={best_cost:.4f} current={current_cost:.4f}"
                )
        return best, best_cost, initial_cost


def alns_cvrp(
    instance: Instance,
    demands,
    capacity: float,
    iters: int | None = None,
    seed: int = 0,
    config: AlnsConfig | None = None,
    rng: np.random.Generator | None = None,
) -> AlnsResult:
    """Best CVRP solution over all customers found by ALNS from a split giant tour."""
    config = config or AlnsConfig()
    iterations = config.iterations if iters is None else iters
    if iterations < 1:
        raise RouteGenError("iters must be at least 1")
    demands = np.asarray(demands, dtype=float)
    for i in instance.customers:
        if demands[i] > capacity + 1e-9:
            raise UnroutableNodeError(f"Node {i} demand {demands[i]} exceeds capacity {capacity}")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    search = _Alns(instance, demands, capacity, rng, config)
    best, best_cost, initial_cost = search.run(iterations)
    routes = [Route.build(instance, route) for route in best]
    return AlnsResult(routes=routes, best_cost=best_cost, initial_cost=initial_cost)


def _pool_job(job) -> list[tuple[int, ...]]:
    instance, demands, capacity, entropy, config = job
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))
    result = alns_cvrp(instance, demands, capacity, config=config, rng=rng)
    return [route.sequence for route in result.routes]


def build_route_pool(
    instance: Instance,
    scenarios: ScenarioSet,
    pool_size: int = 200,
    n_starts: int = 10,
    seed: int = 0,
    config: AlnsConfig | None = None,
    workers: int = 1,
    ensure_coverage: bool = True,
) -> RoutePool:
    """
    Run ``n_starts`` ALNS searches per demand realization (every scenario
    plus the expected demand) and per vehicle capacity, and keep the most
    frequently activated routes together with all elementary routes.
    """
    if pool_size < instance.n_customers:
        raise RouteGenError(f"pool_size {pool_size} is below the {instance.n_customers} demand nodes")
    config = config or AlnsConfig()
    vectors = [*scenarios.demands, scenarios.expected_demand()]
    capacities = sorted({p.capacity for p in instance.vehicle_types})
    jobs = []
    for v, demand in enumerate(vectors):
        for c, capacity in enumerate(capacities):
            # demand beyond capacity is truncated so the node still gets a route
            clipped = np.minimum(demand, capacity)
            for start in range(n_starts):
                jobs.append((instance, clipped, capacity, (seed, v, c, start), config))
    logger.info(f"Running {len(jobs)} ALNS searches for the route pool ({workers} worker(s))")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_pool_job, jobs))
    else:
        results = [_pool_job(job) for job in jobs]

    counts: Counter[tuple[int, ...]] = Counter()
    for sequences in results:
        counts.update(sequences)

    elementary = [Route.build(instance, (i,)) for i in instance.customers]
    candidates = sorted(
        (Route.build(instance, seq) for seq in counts if len(seq) > 1),
        key=lambda r: (-counts[r.sequence], r.length, r.sequence),
    )
    selected = candidates[: pool_size - len(elementary)]
    if ensure_coverage:
        covered = {i for route in selected for i in route.sequence}
        chosen = {route.sequence for route in selected}
        for node in instance.customers:
            if node in covered:
                continue
            extra = next((r for r in candidates if node in r.sequence and r.sequence not in chosen), None)
            if extra is None:
                continue
            logger.info(f"Adding route {extra.sequence} so node {node} appears in a multi-node route")
            selected.append(extra)
            chosen.add(extra.sequence)
            covered.update(extra.sequence)
    routes = elementary + selected
    pool = RoutePool(
        routes=tuple(routes),
        activation_count=tuple(counts.get(r.sequence, 0) for r in routes),
    )
    logger.info(f"Route pool: {len(pool)} routes from {len(counts)} distinct activated routes")
    return pool


def _shortest_ordering(instance: Instance, subset: tuple[int, ...]) -> tuple[int, ...]:
    best_seq, best_len = subset, math.inf
    for seq in itertools.permutations(subset):
        if seq != canonical_sequence(seq):
            continue
        length = instance.route_length(seq)
        if length < best_len - 1e-12:
            best_seq, best_len = seq, length
    return best_seq


def enumerate_routes(instance: Instance) -> RoutePool:
    """
    Complete pool: one shortest ordering per nonempty customer subset.

    Any other ordering of a subset is dominated in cost and duration.
    """
    if instance.n_customers > ENUMERATION_LIMIT:
        raise RouteGenError(
            f"Full enumeration is limited to {ENUMERATION_LIMIT} customers, got {instance.n_customers}"
        )
    routes = []
    customers = list(instance.customers)
    for size in range(1, len(customers) + 1):
        for subset in itertools.combinations(customers, size):
            routes.append(Route.build(instance, _shortest_ordering(instance, subset)))
    return RoutePool(routes=tuple(routes), activation_count=tuple(0 for _ in routes))
