#!/usr/bin/env python3
"""Pick the scenario count with the exact binomial tail bound, then solve.

Enforcing every one of N sampled constraint realizations controls the
chance that the resulting plan violates more than an eps fraction of
future draws.  required_sample_size inverts the exact tail bound, and
we confirm N is minimal.  The stacked scenario LP is then solved and,
for right-hand-side-only uncertainty, cross-checked against the
equivalent single worst-draw program.
"""

import numpy as np

from postfeas import (
    LpProblem,
    NigPrior,
    Rng,
    ScenarioSet,
    build_scenario_lp,
    fit_nig,
    predictive,
    predictive_array,
    required_sample_size,
    rhs_scenario_min,
    solve_lp,
    violation_bound,
)
from postfeas.stats import normal_array, uniform_array

EPS, DELTA = 0.05, 0.05

print("scenario counts for violation <= eps with confidence 1 - delta:")
for d in (1, 2, 5, 10):
    n_req = required_sample_size(EPS, DELTA, d)
    print(f"  support dimension {d:2d}: N = {n_req:4d}   "
          f"bound at N {violation_bound(n_req, EPS, d):.4f}   "
          f"at N-1 {violation_bound(n_req - 1, EPS, d):.4f}")

# Capacities of two resources are learned from history; scenarios are
# posterior predictive draws of the right-hand sides.
rng = Rng.for_purpose(7, "scenario-demo")
n_obs, sigma = 60, 3.0
design = np.column_stack([np.ones(n_obs), uniform_array(rng, (n_obs,))])
truth = np.array([[50.0, -2.0], [40.0, 1.5]])
x_ctx = np.array([1.0, 0.5])

rows = np.array([[1.0, 1.5], [2.0, 1.0]])
preds = []
for j in range(2):
    y = design @ truth[j] + sigma * normal_array(rng, (n_obs,))
    preds.append(predictive(fit_nig(design, y, NigPrior.default(2)), x_ctx))

n_scen = required_sample_size(EPS, DELTA, d=2)
draw_rng = Rng.for_purpose(7, "scenario-demo", "draws")
rhs_draws = np.column_stack(
    [predictive_array(p, draw_rng, n_scen) for p in preds]
)
scen = ScenarioSet.from_rhs_draws(rows, ("<=", "<="), rhs_draws,
                                  (draw_rng.seed, draw_rng.stream_id))

base = LpProblem([4.0, 3.0], [], [(0.0, 30.0), (0.0, 30.0)])
stacked = solve_lp(build_scenario_lp(base, scen))
print(f"\n{n_scen} scenarios, stacked LP rows enforced: plan",
      np.round(stacked.x, 4), "profit", round(stacked.objective_value, 4))

# With fixed coefficient rows, enforcing all draws equals enforcing the
# componentwise worst draw; the two routes must coincide.
worst = rhs_scenario_min(rhs_draws)
direct = solve_lp(LpProblem(
    base.objective,
    [(rows[j], "<=", float(worst[j])) for j in range(2)],
    base.bounds(),
))
print("single worst-draw LP profit           :",
      round(direct.objective_value, 4))
print("routes agree:",
      abs(stacked.objective_value - direct.objective_value) < 1e-9)

# The redundancy prefilter drops dominated draws without changing the optimum.
lean = solve_lp(build_scenario_lp(base, scen, prefilter=True))
print("prefiltered LP profit                 :",
      round(lean.objective_value, 4))
