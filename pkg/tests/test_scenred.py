"""
Tests for scenario reduction.
"""

import itertools

import numpy as np
import pytest

from fleetmix.domain import ScenarioSet
from fleetmix.scenred import (
    ScenarioReductionError,
    fast_forward_select,
    reduction_distance,
    transport_lp_oracle,
)


def line_scenarios(values) -> ScenarioSet:
    """One customer whose demand takes each of ``values`` with equal probability."""
    demands = np.array([[0.0, v] for v in values])
    return ScenarioSet.uniform(demands)


def random_tree(seed: int, n_scenarios: int, n_nodes: int = 4) -> ScenarioSet:
    rng = np.random.default_rng(seed)
    demands = np.zeros((n_scenarios, n_nodes))
    demands[:, 1:] = rng.uniform(0, 6, size=(n_scenarios, n_nodes - 1))
    probabilities = rng.dirichlet(np.ones(n_scenarios))
    probabilities /= probabilities.sum()
    return ScenarioSet(demands=demands, probabilities=probabilities)


def all_kept_sets(n: int):
    for size in range(1, n + 1):
        yield from itertools.combinations(range(n), size)


class TestReductionDistance:
    """Redistribution rule: deleted mass moves to the nearest kept scenario."""

    def test_worked_line_example(self):
        distance, tree = reduction_distance(line_scenarios([0, 1, 10]), {1, 2})
        assert distance == pytest.approx(1 / 3)
        assert tree.kept_ids == (1, 2)
        assert tree.new_probs == pytest.approx((2 / 3, 1 / 3))
        assert tree.assignment == {0: 1}

    def test_duplicate_scenarios(self):
        scenarios = line_scenarios([3, 3])
        distance, tree = reduction_distance(scenarios, [1])
        assert distance == 0.0
        assert tree.new_probs == (1.0,)

    def test_ties_go_to_lowest_kept_index(self):
        distance, tree = reduction_distance(line_scenarios([-1, 0, 1]), [0, 2])
        assert tree.assignment == {1: 0}
        assert distance == pytest.approx(1 / 3)

    def test_probabilities_stay_a_distribution(self):
        scenarios = random_tree(3, 7)
        _, tree = reduction_distance(scenarios, [1, 4])
        assert sum(tree.new_probs) == pytest.approx(1.0, abs=1e-9)
        for s, p in zip(tree.kept_ids, tree.new_probs):
            assert p >= scenarios.probabilities[s]

    def test_reduced_set(self):
        reduced = reduction_distance(line_scenarios([0, 1, 10]), [1, 2])[1].apply(line_scenarios([0, 1, 10]))
        assert reduced.n_scenarios == 2
        assert reduced.demands[:, 1].tolist() == [1.0, 10.0]

    @pytest.mark.parametrize("kept", [[], [5], [-1]])
    def test_invalid_kept_sets(self, kept):
        with pytest.raises(ScenarioReductionError):
            reduction_distance(line_scenarios([0, 1, 2]), kept)

    def test_enlarging_kept_set_never_increases_distance(self):
        scenarios = random_tree(8, 6)
        for kept in all_kept_sets(6):
            base, _ = reduction_distance(scenarios, kept)
            for extra in set(range(6)) - set(kept):
                larger, _ = reduction_distance(scenarios, (*kept, extra))
                assert larger <= base + 1e-12

    def test_to_dict(self):
        _, tree = reduction_distance(line_scenarios([0, 1, 10]), [1, 2])
        data = tree.to_dict()
        assert data["kept_ids"] == [1, 2]
        assert data["assignment"] == {"0": 1}


class TestTransportOracle:
    """The nearest-kept rule solves the transportation problem exactly."""

    @pytest.mark.parametrize("seed", range(5))
    def test_identity_on_every_kept_set(self, seed):
        scenarios = random_tree(seed, 2 + seed % 5)
        for kept in all_kept_sets(scenarios.n_scenarios):
            distance, tree = reduction_distance(scenarios, kept)
            assert transport_lp_oracle(scenarios, kept) == pytest.approx(distance, abs=1e-9)
            assert transport_lp_oracle(scenarios, kept, tree.new_probs) == pytest.approx(distance, abs=1e-9)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(100, 150))
    def test_identity_on_larger_trees(self, seed):
        scenarios = random_tree(seed, 2 + seed % 7)
        for kept in all_kept_sets(scenarios.n_scenarios):
            distance, _ = reduction_distance(scenarios, kept)
            assert transport_lp_oracle(scenarios, kept) == pytest.approx(distance, abs=1e-9)

    def test_fixed_marginals_can_cost_more(self):
        scenarios = line_scenarios([0, 1, 10])
        # forcing mass 1/2 onto scenario 10 moves extra probability a long way
        assert transport_lp_oracle(scenarios, [1, 2], [0.5, 0.5]) > 1 / 3


class TestFastForwardSelect:
    def test_worked_line_example(self):
        tree = fast_forward_select(line_scenarios([0, 1, 10]), 2)
        assert tree.kept_ids == (1, 2)
        assert tree.distance == pytest.approx(1 / 3)
        assert tree.new_probs == pytest.approx((2 / 3, 1 / 3))
        assert [step.picked for step in tree.steps] == [1, 2]
        assert tree.steps[0].distance == pytest.approx(10 / 3)

    def test_keeping_everything_has_zero_distance(self):
        scenarios = random_tree(2, 5)
        tree = fast_forward_select(scenarios, 5)
        assert tree.distance == 0.0
        assert tree.new_probs == pytest.approx(tuple(scenarios.probabilities))

    def test_symmetric_pair_picks_lowest_index(self):
        tree = fast_forward_select(line_scenarios([-2, 2]), 1)
        assert tree.kept_ids == (0,)
        assert tree.distance == pytest.approx(2.0)

    @pytest.mark.parametrize("k", [0, 4])
    def test_k_out_of_range(self, k):
        with pytest.raises(ScenarioReductionError):
            fast_forward_select(line_scenarios([0, 1, 2]), k)

    @pytest.mark.parametrize("seed", range(4))
    def test_each_step_is_greedy_optimal(self, seed):
        scenarios = random_tree(seed, 7)
        tree = fast_forward_select(scenarios, 4)
        chosen: list[int] = []
        for step in tree.steps:
            best = min(
                reduction_distance(scenarios, (*chosen, c))[0] for c in range(7) if c not in chosen
            )
            assert reduction_distance(scenarios, (*chosen, step.picked))[0] == pytest.approx(best, abs=1e-12)
            assert step.distance == pytest.approx(best, abs=1e-12)
            chosen.append(step.picked)

    @pytest.mark.parametrize("seed", range(4))
    def test_never_beats_exhaustive_best(self, seed):
        scenarios = random_tree(seed, 7)
        for k in (1, 2, 3):
            tree = fast_forward_select(scenarios, k)
            best = min(reduction_distance(scenarios, kept)[0] for kept in itertools.combinations(range(7), k))
            assert tree.distance >= best - 1e-12
