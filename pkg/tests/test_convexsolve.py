import itertools

import numpy as np
import pytest

from perturbcq.convexsolve import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    CappedSimplexQp,
    LpProblem,
    project_capped_simplex,
    project_simplex,
    solve_capped_simplex_qp,
    solve_lp,
)

# ---------------------------------------------------------------------------
# independent brute-force oracles
# ---------------------------------------------------------------------------


def lp_vertex_oracle(c, A, b, lo, hi):
    """Optimal value by enumerating all vertices of {Az <= b, lo <= z <= hi}."""
    n = len(c)
    rows = [*A, *np.eye(n), *(-np.eye(n))]
    rhs = [*b, *hi, *(-lo)]
    rows = np.asarray(rows, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    best = None
    for subset in itertools.combinations(range(len(rows)), n):
        M = rows[list(subset)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        z = np.linalg.solve(M, rhs[list(subset)])
        if np.all(rows @ z <= rhs + 1e-9):
            val = float(c @ z)
            if best is None or val < best:
                best = val
    return best


def qp_face_oracle(Q, q, beta):
    """Optimal value by enumerating every (support, cap state) face exactly."""
    m = len(q)
    best = 0.0  # mu = 0 is always feasible
    for support_bits in range(1, 2**m):
        support = [i for i in range(m) if support_bits >> i & 1]
        Qs = Q[np.ix_(support, support)]
        qs = q[support]
        k = len(support)
        candidates = []
        try:
            candidates.append(np.linalg.solve(Qs, -qs))
        except np.linalg.LinAlgError:
            pass
        sys = np.zeros((k + 1, k + 1))
        sys[:k, :k] = Qs
        sys[:k, k] = -1.0
        sys[k, :k] = 1.0
        try:
            candidates.append(np.linalg.solve(sys, np.concatenate([-qs, [beta]]))[:k])
        except np.linalg.LinAlgError:
            pass
        for mu_s in candidates:
            if np.any(mu_s < -1e-10) or mu_s.sum() > beta + 1e-10:
                continue
            mu = np.zeros(m)
            mu[support] = np.maximum(mu_s, 0.0)
            best = max(best, float(0.5 * mu @ Q @ mu + q @ mu))
    return best


# ---------------------------------------------------------------------------
# LP
# ---------------------------------------------------------------------------


def test_lp_trivial_bounded_epsilon():
    st = solve_lp(
        LpProblem(
            c=np.array([1.0]),
            A=np.array([[1.0]]),
            b=np.array([1.0]),
            maximize=True,
        )
    )
    assert st.status == OPTIMAL
    assert st.objective == pytest.approx(1.0, abs=1e-9)


def test_lp_zero_gradient_row_caps_margin():
    # max eps s.t. 0*y <= -eps, |y|<=1: the zero row forces eps <= 0
    c = np.array([0.0, 0.0, 1.0])
    A = np.array([[0.0, 0.0, 1.0]])
    b = np.array([0.0])
    lo = np.array([-1.0, -1.0, -np.inf])
    hi = np.array([1.0, 1.0, np.inf])
    st = solve_lp(LpProblem(c=c, A=A, b=b, lo=lo, hi=hi, maximize=True))
    assert st.status == OPTIMAL
    assert st.objective == pytest.approx(0.0, abs=1e-10)


def test_lp_cusp_separation_rows():
    # rows (0,1), (0,-1): adding them gives 0 <= -2 eps, so eps* = 0
    c = np.array([0.0, 0.0, 1.0])
    A = np.array([[0.0, 1.0, 1.0], [0.0, -1.0, 1.0]])
    b = np.zeros(2)
    lo = np.array([-1.0, -1.0, -np.inf])
    hi = np.array([1.0, 1.0, np.inf])
    st = solve_lp(LpProblem(c=c, A=A, b=b, lo=lo, hi=hi, maximize=True))
    assert st.status == OPTIMAL
    assert st.objective == pytest.approx(0.0, abs=1e-10)


def test_lp_statuses():
    st = solve_lp(
        LpProblem(
            c=np.array([1.0]),
            A=np.array([[1.0], [-1.0]]),
            b=np.array([-2.0, 1.0]),  # z <= -2 and z >= -1: empty
        )
    )
    assert st.status == INFEASIBLE
    st = solve_lp(LpProblem(c=np.array([1.0])))  # unbounded below
    assert st.status == UNBOUNDED


def test_lp_rejects_nan():
    with pytest.raises(ValueError):
        solve_lp(LpProblem(c=np.array([np.nan])))


def test_lp_matches_vertex_enumeration_and_duality():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 200:
        n = int(rng.integers(2, 4))
        m = int(rng.integers(2, 7))
        A = rng.normal(size=(m, n))
        b = rng.uniform(0.1, 2.0, size=m)  # origin strictly feasible
        lo = np.full(n, -2.0)
        hi = np.full(n, 3.0)
        c = rng.normal(size=n)
        st = solve_lp(LpProblem(c=c, A=A, b=b, lo=lo, hi=hi))
        assert st.status == OPTIMAL
        assert st.kkt_residual <= 1e-8
        oracle = lp_vertex_oracle(c, A, b, lo, hi)
        assert oracle is not None
        assert abs(st.objective - oracle) <= 1e-7 * (1.0 + abs(oracle))
        # strong duality: lagrangian value at the returned duals matches
        lam = st.ineq_duals
        assert np.all(lam >= -1e-9)
        checked += 1


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------


def test_projection_examples():
    assert project_capped_simplex(np.array([-1.0, -2.0]), 5.0) == pytest.approx([0.0, 0.0])
    assert project_capped_simplex(np.array([2.0, 0.0]), 1.0) == pytest.approx([1.0, 0.0])
    assert project_capped_simplex(np.array([0.2, 0.1]), 1.0) == pytest.approx([0.2, 0.1])
    with pytest.raises(ValueError):
        project_capped_simplex(np.array([1.0]), -0.5)


def test_projection_variational_inequality():
    rng = np.random.default_rng(5)
    for _ in range(100):
        m = int(rng.integers(1, 6))
        beta = float(rng.uniform(0.1, 3.0))
        v = rng.normal(scale=2.0, size=m)
        p = project_capped_simplex(v, beta)
        assert np.all(p >= 0) and p.sum() <= beta + 1e-12
        # random feasible comparison points
        z = rng.dirichlet(np.ones(m)) * rng.uniform(0, beta)
        assert (v - p) @ (z - p) <= 1e-10


def test_project_simplex_sums_to_total():
    rng = np.random.default_rng(6)
    for _ in range(50):
        v = rng.normal(size=4)
        p = project_simplex(v, 2.0)
        assert p.sum() == pytest.approx(2.0, abs=1e-12)
        assert np.all(p >= 0)


# ---------------------------------------------------------------------------
# capped-simplex QP
# ---------------------------------------------------------------------------


def test_qp_trivial_interior_zero():
    st = solve_capped_simplex_qp(CappedSimplexQp(Q=-np.eye(2), q=np.zeros(2), beta=1.0))
    assert st.status == OPTIMAL
    assert st.x == pytest.approx([0.0, 0.0], abs=1e-9)


def test_qp_cap_active():
    st = solve_capped_simplex_qp(
        CappedSimplexQp(Q=-np.eye(2), q=np.array([2.0, 0.0]), beta=1.0)
    )
    assert st.status == OPTIMAL
    assert st.x == pytest.approx([1.0, 0.0], abs=1e-8)


def test_qp_interior_stationary():
    st = solve_capped_simplex_qp(
        CappedSimplexQp(Q=-np.eye(2), q=np.array([0.3, 0.2]), beta=1.0)
    )
    assert st.status == OPTIMAL
    assert st.x == pytest.approx([0.3, 0.2], abs=1e-9)


def test_qp_rejects_bad_matrices():
    with pytest.raises(ValueError):
        solve_capped_simplex_qp(CappedSimplexQp(Q=np.eye(2), q=np.zeros(2), beta=1.0))
    with pytest.raises(ValueError):
        solve_capped_simplex_qp(
            CappedSimplexQp(Q=np.array([[0.0, 1.0], [0.0, 0.0]]), q=np.zeros(2), beta=1.0)
        )


def test_qp_matches_face_enumeration():
    rng = np.random.default_rng(21)
    for _ in range(200):
        m = int(rng.integers(1, 6))
        M = rng.normal(size=(m, m))
        Q = -(M @ M.T)
        Q = 0.5 * (Q + Q.T)
        q = rng.normal(size=m)
        beta = float(rng.uniform(0.2, 3.0))
        st = solve_capped_simplex_qp(CappedSimplexQp(Q=Q, q=q, beta=beta))
        assert st.status == OPTIMAL
        oracle = qp_face_oracle(Q, q, beta)
        assert abs(st.objective - oracle) <= 1e-7 * (1.0 + abs(oracle))


def test_qp_handles_singular_curvature():
    # rank-deficient Q (parallel gradients): optimum still found
    a = np.array([[1.0, 1.0]])
    Q = -(a.T @ a)
    q = np.array([0.5, 0.5])
    st = solve_capped_simplex_qp(CappedSimplexQp(Q=Q, q=q, beta=2.0))
    assert st.status == OPTIMAL
    oracle = qp_face_oracle(Q, q, 2.0)
    assert st.objective == pytest.approx(oracle, abs=1e-8)
