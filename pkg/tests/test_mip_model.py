"""
Tests for the solver-agnostic model container.
"""

import math

import numpy as np
import pytest

from fleetmix.mip import MipSolution, ModelBuildError, ModelBuilder, Sense, SolveStatus, VarKind, vname


def small_model():
    builder = ModelBuilder("small")
    x = builder.add_var("x", VarKind.BINARY, obj=-3.0, group="first_stage")
    y = builder.add_var("y", lower=0.0, upper=4.0, obj=1.0)
    builder.add_constraint("link", [(y, 1.0), (x, -2.0)], Sense.GE, 0.0)
    builder.add_constraint("cap", [(x, 1.0), (y, 1.0)], Sense.LE, 3.0)
    builder.add_constraint("fix", [(y, 1.0)], Sense.EQ, 2.0)
    return builder.build()


class TestModelBuilder:
    def test_names(self):
        assert vname("x", 0, 3, "CM") == "x_0_3_CM"

    def test_duplicate_variable(self):
        builder = ModelBuilder("dup")
        builder.add_var("x")
        with pytest.raises(ModelBuildError):
            builder.add_var("x")

    def test_duplicate_constraint(self):
        builder = ModelBuilder("dup")
        x = builder.add_var("x")
        builder.add_constraint("c", [(x, 1.0)], Sense.LE, 1.0)
        with pytest.raises(ModelBuildError):
            builder.add_constraint("c", [(x, 1.0)], Sense.LE, 2.0)

    def test_terms_are_merged_and_zeros_dropped(self):
        builder = ModelBuilder("merge")
        x = builder.add_var("x")
        y = builder.add_var("y")
        con = builder.add_constraint("c", [(y, 1.0), (x, 2.0), (x, 1.0), (y, -1.0)], Sense.LE, 5.0)
        assert con.terms == ((x, 3.0),)

    def test_empty_constraint_that_holds_is_skipped(self):
        builder = ModelBuilder("empty")
        assert builder.add_constraint("c", [], Sense.LE, 0.0) is None
        assert builder.build().constraints == ()

    def test_empty_constraint_that_cannot_hold(self):
        builder = ModelBuilder("empty")
        with pytest.raises(ModelBuildError):
            builder.add_constraint("c", [], Sense.GE, 1.0)

    def test_binary_bounds_are_clipped(self):
        builder = ModelBuilder("clip")
        builder.add_var("b", VarKind.BINARY, lower=-5, upper=7)
        var = builder.build().variables[0]
        assert (var.lower, var.upper) == (0.0, 1.0)

    def test_groups(self):
        model = small_model()
        assert model.groups == {"first_stage": (0,)}
        assert model.n_binaries == 1


class TestMipModel:
    def test_arrays_split_rows_by_sense(self):
        arrays = small_model().arrays
        # the >= row is negated into the <= block
        assert arrays.a_ub.toarray().tolist() == [[1.0, 1.0], [2.0, -1.0]]
        assert arrays.b_ub.tolist() == [3.0, 0.0]
        assert arrays.a_eq.toarray().tolist() == [[0.0, 1.0]]
        assert arrays.integrality.tolist() == [1, 0]
        assert arrays.row_lower.tolist() == [0.0, -math.inf, 2.0]

    def test_objective_and_violation(self):
        model = small_model()
        values = np.array([1.0, 2.0])
        assert model.objective_value(values) == pytest.approx(-1.0)
        assert model.max_violation(values) == 0.0
        assert model.max_violation(np.array([1.0, 1.0])) == pytest.approx(1.0)

    def test_with_changes(self):
        model = small_model()
        fixed = model.with_changes(bounds={0: (1.0, 1.0)}, name="fixed")
        assert fixed.variables[0].lower == 1.0
        assert model.variables[0].lower == 0.0
        assert fixed.name == "fixed"

    def test_unknown_index(self):
        model = small_model()
        with pytest.raises(KeyError):
            model.index("z")

    def test_describe(self):
        assert small_model().describe() == "small: 2 variables (1 binary), 3 constraints"


class TestMipSolution:
    def test_gap_and_bound_clipping(self):
        solution = MipSolution.create(np.zeros(2), 10.0, 12.0, SolveStatus.OPTIMAL, 2)
        assert solution.best_bound == 10.0
        assert solution.gap == 0.0
        partial = MipSolution.create(np.zeros(2), 10.0, 8.0, SolveStatus.FEASIBLE, 2)
        assert partial.gap == pytest.approx(0.2)

    def test_no_solution(self):
        solution = MipSolution.create(None, math.inf, math.inf, SolveStatus.INFEASIBLE, 3)
        assert not solution.has_solution
        assert solution.values.tolist() == [0.0, 0.0, 0.0]
        assert math.isinf(solution.gap)

    def test_value_by_name(self):
        model = small_model()
        solution = MipSolution.create(np.array([1.0, 2.0]), -1.0, -1.0, SolveStatus.OPTIMAL, 2)
        assert solution.value(model, "y") == 2.0
        assert solution.is_optimal
