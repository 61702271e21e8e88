#!/usr/bin/env python3
"""Escaping a strict saddle: descent-only versus curvature-enabled.

The quartic double well (x^2 - 1)^2 / 4 + y^2 / 2 has a strict saddle at the
origin (Hessian diag(-1, 1)) and two minima at (+-1, 0).  Started exactly at
the saddle, a descent-only method sees a zero gradient and stops; the dynamic
method computes a negative-curvature direction and walks down to a minimum.
"""

import numpy as np

from ncopt import TerminationSpec, dynamic_solve, make_problem, two_step_solve

saddle = np.zeros(2)

print("== dynamic method, descent-only twin ==")
stuck = dynamic_solve(make_problem("quartic_saddle"), x0=saddle,
                      use_curvature=False)
print("termination: %s after %d iteration(s), f = %.4f"
      % (stuck.termination_reason.value, stuck.total_iterations, stuck.final_f))

print("\n== dynamic method with curvature steps ==")
escaped = dynamic_solve(make_problem("quartic_saddle"), x0=saddle)
for r in escaped.records:
    print("  k=%d  f=%.3e  |g|=%.3e  lambda=%+.3f  branch=%s"
          % (r.index, r.f_value, r.gradient_norm, r.lam, r.step_taken))
print("termination: %s, final x = %s, f = %.3e"
      % (escaped.termination_reason.value,
         np.array2string(escaped.records[-1].x, precision=6), escaped.final_f))

print("\n== fixed-stepsize two-step method from the same saddle ==")
# admissible for the documented local constants (L <= 11, sigma <= 12 on
# the box |x|,|y| <= 2): alpha < 2/L, beta < 3/sigma
problem = make_problem("quartic_saddle")
report = two_step_solve(problem, alpha=0.15, beta=0.2, x0=saddle,
                        termination=TerminationSpec(max_iterations=100))
x_hat = report.records[0].x_hat
print("first curvature step lands at x_hat = %s with f = %.6f (down from 0.25)"
      % (np.array2string(x_hat, precision=4), problem.evaluate(x_hat)))
print("termination: %s after %d iterations, f = %.3e"
      % (report.termination_reason.value, report.total_iterations, report.final_f))
