"""Solving a perturbed problem with the penalized SQP iteration
==============================================================

At level alpha = 6.8 the ball of the ball-in-a-box family has swallowed the
corner (-1, -1), so minimizing f = x1 + x2 over the perturbed set has its
optimum exactly at that corner with two active box faces.

The iteration solves, at each step, a proximally regularized linear model of
the constraints with an l-infinity slack penalized by beta; beta grows by
delta whenever the linearized system cannot be satisfied, and stabilizes once
it dominates the multipliers.  The subproblem is solved through its dual, a
quadratic program over the capped simplex {mu >= 0, sum mu <= beta}.
"""

import numpy as np

from perturbcq import (
    EsqmParams,
    Polynomial,
    catalog,
    estimate_lipschitz,
    kkt_residual,
    run_esqm,
)
from perturbcq.model import PerturbationSpec

prob = catalog("ball_box", n=2, a=(0.4, 0.2))
f = Polynomial.variable(2, 0) + Polynomial.variable(2, 1)  # f = x1 + x2

L_obj, L_con = estimate_lipschitz(prob)
params = EsqmParams(
    alpha=6.8,
    beta0=10.0,
    delta=1.0,
    curvature_obj=max(L_obj, 1.0),
    curvature_con=max(L_con),
)

trace = run_esqm(prob, f, x0=(-0.3, 0.9), params=params)

print(f"termination: {trace.termination} after {len(trace.xs) - 1} iterations")
print(f"x* = {np.round(trace.x_final, 8)}   f(x*) = {f.evaluate(trace.x_final):.8f}")
print(f"final multipliers lambda = {np.round(trace.multipliers[-1], 6)}")
print(f"final KKT residual = {trace.kkt_residuals[-1]:.2e}")

print("\niteration history (every 3rd step):")
print("  k    x1         x2         slack      beta   kkt")
for k in range(0, len(trace.xs), 3):
    x = trace.xs[k]
    print(
        f"  {k:<4d} {x[0]:+.6f}  {x[1]:+.6f}  {trace.slacks[k]:.2e}  "
        f"{trace.betas[k]:<6.1f} {trace.kkt_residuals[k]:.1e}"
    )

# The merit quantity (f(x_k) - f_min)/beta_k + alpha + max-violation is
# nonincreasing along the run; verify with a crude grid lower bound on f.
xs = np.linspace(-1.5, 1.5, 300)
grid = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
f_min = float(f.evaluate_many(grid).min()) * 1.1
merit = trace.merit_values(f_min=f_min, alpha=6.8)
print(f"\nmerit decrease per step, worst case: {np.max(np.diff(merit)):.2e}")

# Independent replay of the optimality conditions at the reported solution.
res = kkt_residual(prob, f, trace.x_final, trace.multipliers[-1],
                   PerturbationSpec.diagonal(6.8))
print(f"independent KKT replay at x*: {res:.2e}")
