#!/usr/bin/env python3
"""Solve a small production-planning LP with the bundled simplex solver.

Two products share three machine resources.  We maximize profit, cross
check the optimum against exhaustive vertex enumeration, round-trip the
problem through its JSON form, and show how infeasible and unbounded
programs are reported.
"""

import numpy as np

from postfeas import (
    LpProblem,
    brute_force_lp,
    max_violation,
    problem_from_json,
    problem_to_json,
    solve_lp,
)

profit = [3.0, 2.0]
machine_rows = [
    ([1.0, 1.0], "<=", 4.0),   # assembly hours
    ([2.0, 1.0], "<=", 5.0),   # machining hours
    ([0.0, 1.0], "<=", 3.0),   # packaging hours
]
problem = LpProblem(profit, machine_rows, [(0.0, None), (0.0, None)])

sol = solve_lp(problem)
print("status          :", sol.status)
print("plan            :", np.round(sol.x, 6))
print("profit          :", round(sol.objective_value, 6))
print("worst slack used:", max_violation(problem, sol.x))

# Independent check: enumerate every basic feasible point and keep the best.
ref = brute_force_lp(problem)
print("vertex-enumeration optimum matches:",
      abs(sol.objective_value - ref.objective_value) < 1e-9)

# The JSON form is a faithful round trip.
text = problem_to_json(problem)
again = solve_lp(problem_from_json(text))
print("JSON round-trip objective         :", round(again.objective_value, 6))

# Contradictory rows are detected, not silently "solved".
bad = LpProblem(profit, [([1.0, 0.0], ">=", 2.0), ([1.0, 0.0], "<=", 1.0)],
                [(0.0, None), (0.0, None)])
print("contradictory rows                :", solve_lp(bad).status)

# So is a profit ray with nothing to stop it.
free = LpProblem(profit, [], [(0.0, None), (0.0, None)])
print("no binding resources              :", solve_lp(free).status)
