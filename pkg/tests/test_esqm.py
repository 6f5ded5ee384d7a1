import numpy as np
import pytest

from perturbcq.esqm import (
    EsqmParams,
    esqm_step,
    estimate_lipschitz,
    homotopy_run,
    kkt_residual,
    run_esqm,
)
from perturbcq.model import PerturbationSpec, ProblemInstance, catalog
from perturbcq.poly import Polynomial


def linear_objective(n, coefs):
    out = Polynomial.zero(n)
    for i, c in enumerate(coefs):
        out = out + float(c) * Polynomial.variable(n, i)
    return out


def grid_f_min(prob, f, resolution=200):
    """Crude objective lower bound: dense-grid minimum inflated by 10%."""
    axes = [np.linspace(lo, hi, resolution) for lo, hi in prob.sample_box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    gmin = float(np.min(f.evaluate_many(pts)))
    return gmin - 0.1 * abs(gmin) - 1e-9


# ---------------------------------------------------------------------------
# curvature estimation
# ---------------------------------------------------------------------------


def test_lipschitz_constant_hessian():
    prob = catalog("ball_box", n=2, a=(0.4, 0.2))
    _, L_con = estimate_lipschitz(prob)
    assert L_con[0] == pytest.approx(3.0, abs=1e-12)  # Hessian -2I, times 1.5
    assert L_con[1] == pytest.approx(3.0, abs=1e-12)


def test_lipschitz_cusp_box():
    prob = catalog("cusp")
    _, L_con = estimate_lipschitz(prob)
    # Hessian diag(6 x1, 0) on the box [-2,1]^2: max norm 12, times 1.5
    assert L_con[0] == pytest.approx(18.0, abs=1e-9)


def test_lipschitz_linear_is_zero():
    prob = catalog("cusp_boxed")
    _, L_con = estimate_lipschitz(prob)
    assert L_con[2] == 0.0


def test_lipschitz_rejects_bad_box():
    prob = catalog("cusp")
    with pytest.raises(ValueError):
        estimate_lipschitz(prob, box=[[0.0, 0.0], [0.0, 1.0]])


# ---------------------------------------------------------------------------
# single step
# ---------------------------------------------------------------------------


def test_step_fixed_point_at_interior_stationary_point():
    prob = catalog("cusp")
    # objective with zero gradient at the strictly feasible point (-1, 0)
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    f = (x1 + 1.0) ** 2 + x2 * x2
    params = EsqmParams(alpha=0.0, curvature_obj=3.0, curvature_con=18.0)
    y, s, mu = esqm_step(prob, f, (-1.0, 0.0), params, beta_k=1.0)
    assert y == pytest.approx([-1.0, 0.0], abs=1e-9)
    assert s == 0.0
    assert mu == pytest.approx([0.0, 0.0], abs=1e-9)


def test_step_matches_brute_force_grid_1d():
    # f = x, g = x <= 0, from x_k = 0 with rho = 1, beta = 1
    x = Polynomial.variable(1, 0)
    prob = ProblemInstance(num_vars=1, inequalities=(x,), sample_box=((-3.0, 3.0),))
    params = EsqmParams(alpha=0.0, curvature_obj=0.5, curvature_con=0.5)
    y, s, mu = esqm_step(prob, x, (0.0,), params, beta_k=1.0)

    ys = np.linspace(-3, 3, 2_000_001)
    model = ys + 1.0 * np.maximum(0.0, ys) + 0.5 * ys**2
    y_star = ys[np.argmin(model)]
    assert y[0] == pytest.approx(y_star, abs=5e-6)  # grid spacing 3e-6
    assert s == pytest.approx(max(0.0, y[0]), abs=1e-12)


def test_step_slack_matches_max_violation():
    # tiny beta: the step barely moves and the slack tracks the violation at y
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    prob = ProblemInstance(
        num_vars=2,
        inequalities=(x1 - 1.0 + 2.0, x2 - 1.0 + 2.0),  # both violated by 1 at (0,0)
        sample_box=((-3.0, 3.0), (-3.0, 3.0)),
    )
    f = linear_objective(2, (0.0, 0.0))
    params = EsqmParams(alpha=0.0, curvature_obj=1.0, curvature_con=1.0)
    y, s, mu = esqm_step(prob, f, (0.0, 0.0), params, beta_k=1e-4)
    viol = max(
        1.0 + (y[0] - 0.0),  # linearization of g1 at y
        1.0 + (y[1] - 0.0),
    )
    assert s == pytest.approx(viol, abs=1e-10)
    assert s > 0.9


def test_step_subproblem_no_worse_than_reference():
    # Step objective at (y*, s*) must not exceed the value at the trivial
    # reference y = x_k, s = max(0, violation)
    prob = catalog("ball_box", n=2, a=(0.4, 0.2))
    f = linear_objective(2, (1.0, 1.0))
    params = EsqmParams(alpha=6.8, curvature_obj=1.0, curvature_con=3.0)
    bounds = PerturbationSpec.diagonal(6.8).bounds(prob)
    rng = np.random.default_rng(17)
    for _ in range(25):
        xk = rng.uniform(-1.4, 1.4, size=2)
        beta = float(rng.uniform(0.5, 20.0))
        y, s, mu = esqm_step(prob, f, xk, params, beta)
        rho = params.curvature_obj + beta * params.curvature_con
        gvals = np.array([g.evaluate(xk) for g in prob.inequalities]) - bounds
        grad_f = np.array([p.evaluate(xk) for p in f.gradient()])

        def model(yv, sv):
            return float(grad_f @ (yv - xk) + beta * sv + 0.5 * rho * np.sum((yv - xk) ** 2))

        ref = model(xk, max(0.0, float(np.max(gvals))))
        assert model(np.asarray(y), s) <= ref + 1e-9


# ---------------------------------------------------------------------------
# KKT residual
# ---------------------------------------------------------------------------


def test_kkt_residual_at_optimal_corner():
    prob = catalog("ball_box", n=2, a=(0.4, 0.2))
    f = linear_objective(2, (1.0, 1.0))
    res = kkt_residual(
        prob, f, (-1.0, -1.0), (0.0, 0.5, 0.5), PerturbationSpec.diagonal(6.8)
    )
    assert res == pytest.approx(0.0, abs=1e-12)


def test_kkt_residual_zero_multipliers_at_stationary_point():
    prob = catalog("cusp")
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    f = (x1 + 1.0) ** 2 + x2 * x2
    res = kkt_residual(prob, f, (-1.0, 0.0), (0.0, 0.0), PerturbationSpec.diagonal(0.0))
    assert res == 0.0


def test_kkt_residual_penalizes_slack_constraint():
    prob = catalog("cusp")
    f = linear_objective(2, (0.0, 1.0))
    x = (-1.0, 0.0)  # both constraints slack by 1
    res = kkt_residual(prob, f, x, (0.5, 0.0), PerturbationSpec.diagonal(0.0))
    assert res >= 0.5 * 1.0 - 1e-12


def test_kkt_residual_rejects_negative_multipliers():
    prob = catalog("cusp")
    f = linear_objective(2, (1.0, 0.0))
    with pytest.raises(ValueError):
        kkt_residual(prob, f, (-1.0, 0.0), (-0.1, 0.0), PerturbationSpec.diagonal(0.0))


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------


def ball_box_setup():
    prob = catalog("ball_box", n=2, a=(0.4, 0.2))
    f = linear_objective(2, (1.0, 1.0))
    L_obj, L_con = estimate_lipschitz(prob)
    params = EsqmParams(
        alpha=6.8,
        beta0=10.0,
        delta=1.0,
        curvature_obj=max(L_obj, 1.0),
        curvature_con=max(L_con),
        max_iter=500,
    )
    return prob, f, params


def test_run_converges_to_free_corner():
    prob, f, params = ball_box_setup()
    trace = run_esqm(prob, f, (-0.5, -0.5), params)
    assert trace.converged
    assert trace.x_final == pytest.approx([-1.0, -1.0], abs=1e-6)
    assert trace.kkt_residuals[-1] <= 1e-6


def test_run_beta_stabilizes():
    prob, f, params = ball_box_setup()
    trace = run_esqm(prob, f, (-0.5, -0.5), params)
    tail = trace.betas[len(trace.betas) // 2 :]
    assert len(set(tail)) == 1  # constant after finitely many iterations


def test_run_merit_nonincreasing():
    prob, f, params = ball_box_setup()
    f_min = grid_f_min(prob, f)
    for seed in range(3):
        rng = np.random.default_rng(100 + seed)
        x0 = rng.uniform(-1.5, -0.2, size=2)
        trace = run_esqm(prob, f, x0, params)
        merits = trace.merit_values(f_min=f_min, alpha=params.alpha)
        diffs = np.diff(merits)
        assert np.max(diffs) <= 1e-9


def test_run_cusp_boxed_vertex():
    prob = catalog("cusp_boxed")
    f = linear_objective(2, (-1.0, 0.0))
    L_obj, L_con = estimate_lipschitz(prob)
    params = EsqmParams(
        alpha=0.1,
        beta0=10.0,
        delta=1.0,
        curvature_obj=max(L_obj, 1.0),
        curvature_con=max(L_con),
        max_iter=1000,
    )
    trace = run_esqm(prob, f, (-0.5, -0.5), params)
    assert trace.converged
    assert trace.x_final == pytest.approx([0.1 ** (1 / 3), 0.0], abs=1e-7)


def test_run_unconstrained_interior_minimum():
    prob = catalog("cusp")
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    f = (x1 + 1.0) ** 2 + (x2 - 0.2) ** 2
    params = EsqmParams(
        alpha=0.0, beta0=1.0, delta=1.0, curvature_obj=3.0, curvature_con=18.0
    )
    trace = run_esqm(prob, f, (-1.3, 0.5), params)
    assert trace.converged
    assert trace.x_final == pytest.approx([-1.0, 0.2], abs=1e-7)
    assert np.max(np.abs(trace.multipliers[-1])) <= 1e-9


def test_run_requires_objective_and_no_equalities():
    prob = catalog("cusp")
    params = EsqmParams(alpha=0.0)
    with pytest.raises(ValueError):
        run_esqm(prob, None, (0.0, 0.0), params)
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    eq_prob = ProblemInstance(num_vars=2, inequalities=(x1,), equalities=(x2,))
    with pytest.raises(ValueError):
        run_esqm(eq_prob, x1, (0.0, 0.0), params)


def test_trace_exports(tmp_path):
    prob, f, params = ball_box_setup()
    trace = run_esqm(prob, f, (-0.5, -0.5), params)
    csv_path = tmp_path / "trace.csv"
    trace.write_csv(csv_path, f_min=-3.3, alpha=6.8)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "k,x,s,beta,kkt_residual,merit"
    assert len(lines) == len(trace.xs) + 1
    payload = trace.to_json_dict()
    assert payload["converged"] is True
    assert len(payload["xs"]) == len(trace.xs)


# ---------------------------------------------------------------------------
# homotopy driver
# ---------------------------------------------------------------------------


def cusp_boxed_template(max_iter=2000):
    prob = catalog("cusp_boxed")
    f = linear_objective(2, (-1.0, 0.0))
    L_obj, L_con = estimate_lipschitz(prob)
    return prob, f, EsqmParams(
        alpha=0.1,
        beta0=10.0,
        delta=1.0,
        curvature_obj=max(L_obj, 1.0),
        curvature_con=max(L_con),
        max_iter=max_iter,
    )


def test_homotopy_value_curve_cusp_boxed():
    prob, f, template = cusp_boxed_template()
    trace = homotopy_run(prob, f, [1e-1, 1e-2, 1e-3, 1e-4], template)
    for lvl in trace.levels:
        assert lvl.status == "converged"
        assert abs(lvl.value - (-lvl.alpha ** (1 / 3))) <= 1e-6
    values = trace.values
    assert all(b >= a for a, b in zip(values, values[1:]))  # increasing toward 0


def test_homotopy_constant_value_on_regular_band():
    prob = catalog("ball_box", n=2, a=(0.4, 0.2))
    f = linear_objective(2, (1.0, 1.0))
    L_obj, L_con = estimate_lipschitz(prob)
    template = EsqmParams(
        alpha=7.5, beta0=10.0, delta=1.0,
        curvature_obj=max(L_obj, 1.0), curvature_con=max(L_con), max_iter=500,
    )
    trace = homotopy_run(prob, f, [7.5, 7.2, 6.8], template)
    for lvl in trace.levels:
        assert lvl.status == "converged"
        assert lvl.value == pytest.approx(-2.0, abs=1e-6)


def test_homotopy_flags_infeasible_level():
    prob = catalog("ball_box", n=2, a=(0.4, 0.2))
    f = linear_objective(2, (1.0, 1.0))
    L_obj, L_con = estimate_lipschitz(prob)
    template = EsqmParams(
        alpha=6.8, beta0=10.0, delta=1.0,
        curvature_obj=max(L_obj, 1.0), curvature_con=max(L_con), max_iter=120,
    )
    trace = homotopy_run(prob, f, [6.8, 4.0], template)
    assert trace.levels[0].status == "converged"
    assert trace.levels[1].status == "infeasible"


def test_homotopy_rejects_bad_schedule():
    prob, f, template = cusp_boxed_template()
    with pytest.raises(ValueError):
        homotopy_run(prob, f, [0.1, 0.2], template)
    with pytest.raises(ValueError):
        homotopy_run(prob, f, [0.1, -0.01], template)
