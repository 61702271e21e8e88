#!/usr/bin/env python3
"""How the dynamic method sizes its steps.

Each iteration builds two upper models of the objective: a quadratic one
along the descent direction (weighted by L_k) and a cubic one along the
negative-curvature direction (weighted by sigma_k).  The step with the
larger predicted reduction is tried; if the true decrease falls short of the
prediction the corresponding constant is inflated and the iteration retries.
This script traces those constants on Himmelblau's function and then counts
how many iterates kept a large gradient or strong negative curvature,
comparing against the worst-case census bounds.
"""

import numpy as np

from ncopt import (
    LipschitzState,
    TerminationSpec,
    complexity_census,
    dynamic_solve,
    make_problem,
)

problem = make_problem("himmelblau")
report = dynamic_solve(
    problem,
    lipschitz_init=LipschitzState(L_current=1e-2, sigma_current=1e-2),
    termination=TerminationSpec(max_iterations=400),
    x0=np.array([0.0, 0.0]),
)

print("start f = %.4f; iterate trace (first 12):" % report.records[0].f_value)
print("  k   f           |g|       lambda    branch     inner  L_k      sigma_k")
for r in report.records[:12]:
    print("  %-3d %-11.4g %-9.3g %+9.3g %-10s %-6d %-8.3g %-8.3g"
          % (r.index, r.f_value, r.gradient_norm, r.lam, r.step_taken,
             r.inner_loop_count, r.lipschitz_L, r.lipschitz_sigma))
print("... %d iterations total, termination: %s, final f = %.3e"
      % (report.total_iterations, report.termination_reason.value, report.final_f))
print("function evaluations: %d (one per inner pass plus the start)"
      % report.total_fevals)

print("\ncensus of hard iterates vs worst-case bounds:")
for eps in (1e-1, 1e-2):
    census = complexity_census(report, epsilon_g=eps, epsilon_H=eps)
    print("  eps=%g:  |G|=%d <= %.3g   |H|=%d <= %.3g"
          % (eps, census.count_G, census.bound_G, census.count_H, census.bound_H))
