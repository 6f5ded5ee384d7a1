"""A cusp where the qualification condition breaks
==================================================

The feasible set {x1^3 + x2 <= a1, x1^3 - x2 <= a2} in the plane has a sharp
vertex.  At the unperturbed vertex (the origin) the two active gradients are
(0, 1) and (0, -1): their convex hull contains zero, so no direction strictly
decreases both constraints and the Mangasarian-Fromovitz condition fails.
Any nonzero diagonal perturbation moves the vertex off the degenerate locus
and the condition is restored everywhere.

This script certifies both facts and then scans the perturbation window for
every singular level, recovering exactly {0}.
"""

import numpy as np

from perturbcq import (
    PerturbationSpec,
    SweepConfig,
    catalog,
    check_mfcq_hull,
    check_mfcq_lp,
    scan_singular,
    sweep_mfcq,
)

prob = catalog("cusp")
print("constraints:")
for g in prob.inequalities:
    print("   ", g, "<= alpha")

# --- pointwise certificates at the unperturbed vertex ----------------------
cert = check_mfcq_lp(prob, PerturbationSpec.diagonal(0.0), (0.0, 0.0))
print(f"\nat the origin (alpha = 0): verdict = {cert.verdict}")
print(f"  failure multipliers lambda = {np.round(cert.multipliers, 6)}")
print("  (a convex combination of the active gradients that sums to zero)")

hull = check_mfcq_hull(prob, PerturbationSpec.diagonal(0.0), (0.0, 0.0))
print(f"  hull formulation agrees: distance to span = {hull.hull_distance:.2e}")

# --- the perturbed vertex is regular ----------------------------------------
alpha = 0.1
v = alpha ** (1 / 3)
cert = check_mfcq_lp(prob, PerturbationSpec.diagonal(alpha), (v, 0.0))
print(f"\nat the perturbed vertex ({v:.4f}, 0) with alpha = {alpha}:")
print(f"  verdict = {cert.verdict}, margin = {cert.margin:.6f}")
print(f"  certified direction y = {np.round(cert.direction, 6)}")

# --- boundary sweeps at two regular levels ----------------------------------
for alpha in (0.1, -0.1):
    res = sweep_mfcq(
        prob, PerturbationSpec.diagonal(alpha), SweepConfig(samples=500, seed=0)
    )
    print(
        f"\nsweep at alpha = {alpha:+.1f}: {len(res.rows)} boundary points, "
        f"verdicts = {res.verdicts}, worst margin = {res.worst_margin:.4f}"
    )

# --- enumerate every singular level in the window ----------------------------
report = scan_singular(prob, (-0.5, 0.5), starts=300, seed=7)
print(f"\nsingular levels in (-0.5, 0.5): {[round(a, 9) for a in report.alphas]}")
print(f"degree-based upper bound on their number: {report.bound}")
w = report.singular_values[0]
print(f"witness: x = {np.round(w.x, 9)}, lambda = {np.round(w.lam, 6)}, "
      f"residual = {w.residual_norm:.1e}")
