"""LP representation, the bounded-variable simplex, and the brute-force oracle."""

import json

import numpy as np
import pytest

from postfeas.errors import DimensionMismatch, DomainError, SizeLimitExceeded
from postfeas.lp import (
    LpProblem,
    LpSolution,
    SolverTolerances,
    brute_force_lp,
    max_violation,
    problem_from_json,
    problem_to_json,
    solution_from_json,
    solution_to_json,
    solve_lp,
    standardize,
)

TOL = SolverTolerances()


def random_box_problem(rng):
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 7))
    c = rng.normal(size=n)
    rows = []
    for _ in range(m):
        a = rng.normal(size=n)
        sense = ("<=", ">=", "=")[int(rng.integers(0, 3))]
        rhs = float(rng.normal() * 2)
        rows.append((a, sense, rhs))
    lo = rng.uniform(-3, 0, size=n)
    hi = lo + rng.uniform(0.5, 4, size=n)
    return LpProblem(c, rows, list(zip(lo, hi)))


def random_mixed_bound_problem(rng):
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 6))
    c = rng.normal(size=n)
    rows = []
    for _ in range(m):
        a = rng.normal(size=n)
        sense = ("<=", ">=", "=")[int(rng.integers(0, 3))]
        rows.append((a, sense, float(rng.normal() * 2)))
    bounds = []
    for _ in range(n):
        kind = int(rng.integers(0, 4))
        if kind == 0:
            bounds.append((None, None))
        elif kind == 1:
            bounds.append((float(rng.uniform(-2, 0)), None))
        elif kind == 2:
            bounds.append((None, float(rng.uniform(0, 2))))
        else:
            lo = float(rng.uniform(-2, 0))
            bounds.append((lo, lo + float(rng.uniform(0.5, 3))))
    return LpProblem(c, rows, bounds)


class TestLpProblem:
    def test_validation(self):
        with pytest.raises(DimensionMismatch):
            LpProblem([1.0], [([1.0, 2.0], "<=", 1.0)], [(0.0, 1.0)])
        with pytest.raises(DomainError):
            LpProblem([np.nan], [([1.0], "<=", 1.0)], [(0.0, 1.0)])
        with pytest.raises(DomainError):
            LpProblem([1.0], [([1.0], "<<", 1.0)], [(0.0, 1.0)])
        with pytest.raises(DomainError):
            LpProblem([1.0], [([1.0], "<=", 1.0)], [(2.0, 1.0)])

    def test_arrays_read_only(self):
        p = LpProblem([1.0, 2.0], [([1.0, 1.0], "<=", 1.0)], [(0.0, 1.0)] * 2)
        with pytest.raises(ValueError):
            p.objective[0] = 5.0

    def test_json_round_trip_bit_exact(self):
        rng = np.random.default_rng(3)
        p = random_mixed_bound_problem(rng)
        q = problem_from_json(problem_to_json(p))
        assert np.array_equal(p.objective, q.objective)
        assert np.array_equal(p.rows, q.rows)
        assert p.senses == q.senses
        assert np.array_equal(p.rhs, q.rhs)
        assert np.array_equal(p.lower, q.lower, equal_nan=True) or np.all(
            (p.lower == q.lower) | (np.isneginf(p.lower) & np.isneginf(q.lower))
        )
        assert np.all(
            (p.upper == q.upper) | (np.isposinf(p.upper) & np.isposinf(q.upper))
        )

    def test_json_infinite_bounds_are_null(self):
        p = LpProblem([1.0], [([1.0], "<=", 1.0)], [(None, None)])
        doc = json.loads(problem_to_json(p))
        assert doc["bounds"] == [[None, None]]


class TestSolveLpBasics:
    def test_single_active_bound(self):
        p = LpProblem([1.0], [([1.0], "<=", 1.0)], [(0.0, None)])
        sol = solve_lp(p)
        assert sol.status == "Optimal"
        assert sol.x[0] == pytest.approx(1.0, abs=1e-9)
        assert sol.objective_value == pytest.approx(1.0, abs=1e-9)

    def test_contradictory_bound(self):
        p = LpProblem([1.0], [([1.0], "<=", -1.0)], [(0.0, None)])
        assert solve_lp(p).status == "Infeasible"

    def test_unbounded(self):
        p = LpProblem([1.0], [([-1.0], "<=", 0.0)], [(0.0, None)])
        assert solve_lp(p).status == "Unbounded"

    def test_degenerate_square_value_unique(self):
        p = LpProblem([1.0, 1.0], [([1.0, 1.0], "<=", 1.0)],
                      [(0.0, None), (0.0, None)])
        a = solve_lp(p)
        b = brute_force_lp(p)
        assert a.status == b.status == "Optimal"
        assert a.objective_value == pytest.approx(1.0, abs=1e-9)
        assert b.objective_value == pytest.approx(1.0, abs=1e-9)

    def test_equality_constraint(self):
        p = LpProblem([2.0, 1.0], [([1.0, 1.0], "=", 3.0)],
                      [(0.0, 2.0), (0.0, 4.0)])
        sol = solve_lp(p)
        assert sol.status == "Optimal"
        assert sol.x[0] == pytest.approx(2.0, abs=1e-9)
        assert sol.x[1] == pytest.approx(1.0, abs=1e-9)

    def test_free_variable(self):
        p = LpProblem([-1.0, 0.0], [([1.0, 1.0], ">=", -5.0)],
                      [(None, None), (0.0, 1.0)])
        sol = solve_lp(p)
        assert sol.status == "Optimal"
        assert sol.x[0] == pytest.approx(-6.0, abs=1e-8)

    def test_no_constraints_bound_flips_only(self):
        p = LpProblem([3.0, -2.0], [], [(0.0, 2.0), (-1.0, 5.0)])
        sol = solve_lp(p)
        assert sol.status == "Optimal"
        assert sol.x == pytest.approx([2.0, -1.0])
        assert sol.objective_value == pytest.approx(8.0)

    def test_cycling_guard_terminates(self):
        # classic degenerate instance that cycles under naive Dantzig
        p = LpProblem(
            [0.75, -150.0, 0.02, -6.0],
            [
                ([0.25, -60.0, -1.0 / 25.0, 9.0], "<=", 0.0),
                ([0.5, -90.0, -1.0 / 50.0, 3.0], "<=", 0.0),
                ([0.0, 0.0, 1.0, 0.0], "<=", 1.0),
            ],
            [(0.0, None)] * 4,
        )
        sol = solve_lp(p)
        assert sol.status == "Optimal"
        assert sol.objective_value == pytest.approx(0.05, abs=1e-9)


class TestSolveLpInvariants:
    def test_feasibility_residuals_random(self):
        rng = np.random.default_rng(20260819)
        optimal = 0
        for _ in range(150):
            p = random_mixed_bound_problem(rng)
            sol = solve_lp(p)
            if sol.status == "Optimal":
                optimal += 1
                assert max_violation(p, sol.x) <= TOL.feas * 10
                direct = float(p.objective @ sol.x)
                scale = max(1.0, abs(direct))
                assert abs(sol.objective_value - direct) <= TOL.obj * scale
        assert optimal > 20

    def test_determinism(self):
        rng = np.random.default_rng(5)
        p = random_box_problem(rng)
        a = solve_lp(p)
        b = solve_lp(p)
        assert a.status == b.status
        assert np.array_equal(a.x, b.x)
        assert a.objective_value == b.objective_value
        assert a.iterations == b.iterations

    def test_scaling_equivariance(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            p = random_box_problem(rng)
            sol = solve_lp(p)
            if sol.status != "Optimal":
                continue
            lam = 37.5
            scaled = LpProblem(lam * p.objective, p.constraints(), p.bounds())
            sol2 = solve_lp(scaled)
            assert sol2.status == "Optimal"
            assert np.array_equal(sol.x, sol2.x)
            assert sol2.objective_value == pytest.approx(
                lam * sol.objective_value, rel=1e-12, abs=1e-12
            )


class TestStandardize:
    def test_le_constraint_gains_slack(self):
        p = LpProblem([1.0], [([1.0], "<=", 1.0)], [(0.0, 1.0)])
        std = standardize(p)
        assert std.A.shape == (1, 2)
        assert std.n_structural == 1

    def test_equality_gains_no_slack(self):
        p = LpProblem([1.0], [([1.0], "=", 1.0)], [(0.0, 2.0)])
        std = standardize(p)
        assert std.A.shape == (1, 1)

    def test_map_back_residuals(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            p = random_mixed_bound_problem(rng)
            sol = solve_lp(p)
            if sol.status == "Optimal":
                assert max_violation(p, sol.x) <= 1e-8 * 10


class TestBruteForce:
    def test_reproduces_tiny_examples(self):
        p1 = LpProblem([1.0], [([1.0], "<=", 1.0)], [(0.0, None)])
        s1 = brute_force_lp(p1)
        assert s1.status == "Optimal" and s1.objective_value == pytest.approx(1.0)
        p2 = LpProblem([1.0], [([1.0], "<=", -1.0)], [(0.0, None)])
        assert brute_force_lp(p2).status == "Infeasible"
        p3 = LpProblem([1.0], [([-1.0], "<=", 0.0)], [(0.0, None)])
        assert brute_force_lp(p3).status == "Unbounded"

    def test_size_guard(self):
        n = 7
        p = LpProblem(np.ones(n), [(np.ones(n), "<=", 1.0)], [(0.0, 1.0)] * n)
        with pytest.raises(SizeLimitExceeded):
            brute_force_lp(p)

    def test_agreement_box_instances(self):
        rng = np.random.default_rng(101)
        for _ in range(80):
            p = random_box_problem(rng)
            fast = solve_lp(p)
            slow = brute_force_lp(p)
            assert fast.status == slow.status
            if fast.status == "Optimal":
                assert abs(fast.objective_value - slow.objective_value) <= 1e-6

    def test_agreement_mixed_bounds(self):
        rng = np.random.default_rng(202)
        statuses = {"Optimal": 0, "Infeasible": 0, "Unbounded": 0}
        for _ in range(120):
            p = random_mixed_bound_problem(rng)
            fast = solve_lp(p)
            slow = brute_force_lp(p)
            assert fast.status == slow.status
            statuses[fast.status] += 1
            if fast.status == "Optimal":
                assert abs(fast.objective_value - slow.objective_value) <= 1e-6
        # the generator must exercise all three statuses to mean anything
        assert min(statuses.values()) >= 5


class TestSolutionJson:
    def test_round_trip(self):
        sol = LpSolution("Optimal", np.array([1.5, -2.0]), 7.25, 11)
        back = solution_from_json(solution_to_json(sol))
        assert back.status == sol.status
        assert np.array_equal(back.x, sol.x)
        assert back.objective_value == sol.objective_value
        assert back.iterations == sol.iterations

    def test_non_optimal_round_trip(self):
        sol = LpSolution("Infeasible", None, float("nan"), 3)
        back = solution_from_json(solution_to_json(sol))
        assert back.status == "Infeasible"
        assert back.x is None
