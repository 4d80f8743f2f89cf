"""
Tests for the Kernel Search heuristic over a route pool.
"""

import math
from unittest.mock import patch

import numpy as np
import pytest

from fleetmix.kernelsearch import (
    KernelSearchError,
    KsConfig,
    kernel_search,
    partition_buckets,
    path_lp_bound,
)
from fleetmix.mip import Backend, SolveLimits, SolveStatus, build_path_model, solve
from fleetmix.mip.backends import LpResult, solve_lp
from fleetmix.routegen import AlnsConfig, build_route_pool, enumerate_routes

from .oracles import random_instance

TIGHT = SolveLimits(gap=1e-9)


@pytest.fixture
def problem():
    return random_instance(seed=11, n_customers=5, n_scenarios=3)


@pytest.fixture
def pool(problem):
    return enumerate_routes(problem.instance)


def run(problem, pool, cfg):
    return kernel_search(problem.instance, problem.scenarios, problem.neighborhoods, problem.costs, pool, cfg)


def exact_optimum(problem, pool) -> float:
    model = build_path_model(problem.instance, problem.scenarios, problem.neighborhoods, problem.costs, pool)
    return solve(model, Backend.HIGHS, TIGHT).objective


class TestKsConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"bucket_size": 0, "t_max": 10},
            {"bucket_size": 5, "t_max": 0},
            {"bucket_size": 5, "t_max": 10, "cycles": 0},
            {"bucket_size": 5, "t_max": 10, "opt_threshold": -0.1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(KernelSearchError):
            KsConfig(**kwargs)

    def test_defaults(self):
        cfg = KsConfig(bucket_size=10, t_max=60)
        assert cfg.cycles == 2
        assert cfg.backend == Backend.INTERNAL.value
        assert cfg.opt_threshold == 0.0


class TestPartitionBuckets:
    def test_full_buckets_plus_remainder(self):
        buckets = partition_buckets(list(range(11)), 4, np.random.default_rng(0))
        assert [len(b) for b in buckets] == [4, 4, 3]
        assert sorted(r for b in buckets for r in b) == list(range(11))

    def test_same_seed_same_buckets(self):
        first = partition_buckets(list(range(20)), 6, np.random.default_rng(5))
        second = partition_buckets(list(range(20)), 6, np.random.default_rng(5))
        assert first == second

    def test_empty(self):
        assert partition_buckets([], 3, np.random.default_rng(0)) == []


class TestKernelSearch:
    """Restricted solves over a growing kernel."""

    def test_never_beats_the_exact_optimum(self, problem, pool):
        plan, trace = run(problem, pool, KsConfig(bucket_size=4, t_max=60, backend="highs", seed=1))
        optimum = exact_optimum(problem, pool)
        assert plan.objective >= optimum - 1e-6
        assert plan.objective <= optimum * 1.05 + 1e-6
        assert plan.check_invariants(problem.instance) == []

    def test_trace_is_monotone(self, problem, pool):
        _, trace = run(problem, pool, KsConfig(bucket_size=3, t_max=60, backend="highs"))
        assert trace.is_monotone
        first = trace.records[0]
        assert (first.cycle, first.bucket) == (0, 0)
        assert first.subproblem_routes == problem.instance.n_customers
        assert all(r.kernel_after >= r.kernel_before for r in trace.records)

    def test_bound_never_exceeds_the_optimum(self, problem, pool):
        _, trace = run(problem, pool, KsConfig(bucket_size=3, t_max=60, backend="highs"))
        optimum = exact_optimum(problem, pool)
        assert all(r.lower_bound <= optimum + 1e-6 for r in trace.records)
        assert path_lp_bound(
            problem.instance, problem.scenarios, problem.neighborhoods, problem.costs, pool
        ) <= optimum + 1e-6

    def test_one_bucket_holding_every_route_is_exact(self, problem, pool):
        plan, _ = run(problem, pool, KsConfig(bucket_size=len(pool), t_max=60, backend="highs", gap=1e-9))
        assert plan.objective == pytest.approx(exact_optimum(problem, pool), abs=1e-6)
        assert plan.status == "optimal"

    def test_loose_threshold_stops_after_the_initial_kernel(self, problem, pool):
        _, trace = run(problem, pool, KsConfig(bucket_size=3, t_max=60, opt_threshold=1.0, backend="highs"))
        assert len(trace.records) == 1

    def test_same_seed_same_trace(self, problem, pool):
        cfg = KsConfig(bucket_size=3, t_max=60, backend="highs", seed=4)
        first = run(problem, pool, cfg)[1].to_rows(with_elapsed=False)
        second = run(problem, pool, cfg)[1].to_rows(with_elapsed=False)
        assert first == second
        assert "elapsed" not in first[0]

    def test_without_lp_bound(self, problem, pool):
        plan, trace = run(problem, pool, KsConfig(bucket_size=len(pool), t_max=60, backend="highs", lp_bound=False))
        assert trace.records[0].lower_bound == -math.inf
        assert math.isfinite(plan.objective)

    def test_lp_bound_gets_half_the_budget(self, problem, pool):
        with patch("fleetmix.kernelsearch.solve_lp", wraps=solve_lp) as lp:
            run(problem, pool, KsConfig(bucket_size=len(pool), t_max=30, backend="highs"))
        assert lp.call_args.args[3] == pytest.approx(15.0)

    def test_lp_bound_timeout_keeps_searching(self, problem, pool):
        timed_out = LpResult(SolveStatus.TIME_LIMIT, None, math.inf)
        with patch("fleetmix.kernelsearch.solve_lp", return_value=timed_out):
            plan, trace = run(problem, pool, KsConfig(bucket_size=len(pool), t_max=60, backend="highs"))
        assert trace.records[0].lower_bound == -math.inf
        assert math.isfinite(plan.objective)

    def test_missing_elementary_routes(self, problem, pool):
        keep = [k for k, route in enumerate(pool.routes) if route.sequence != (1,)]
        with pytest.raises(KernelSearchError, match="elementary"):
            run(problem, pool.subset(keep), KsConfig(bucket_size=3, t_max=10))

    def test_heuristic_pool(self, problem):
        alns = AlnsConfig(iterations=60, segment_length=20)
        heuristic_pool = build_route_pool(problem.instance, problem.scenarios, pool_size=20, n_starts=2, config=alns)
        plan, trace = run(problem, heuristic_pool, KsConfig(bucket_size=5, t_max=60, backend="highs"))
        assert trace.is_monotone
        assert plan.objective >= exact_optimum(problem, enumerate_routes(problem.instance)) - 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_close_to_the_exact_optimum_on_seeded_instances(seed):
    problem = random_instance(seed=200 + seed, n_customers=6, n_scenarios=4)
    pool = enumerate_routes(problem.instance)
    plan, _ = run(problem, pool, KsConfig(bucket_size=10, t_max=120, backend="highs", seed=seed))
    optimum = exact_optimum(problem, pool)
    assert optimum - 1e-6 <= plan.objective <= optimum * 1.05 + 1e-6
