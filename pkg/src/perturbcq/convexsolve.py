"""Small dense convex solvers: an LP front-end (separating-direction form)
and a capped-simplex concave QP solved by projected gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "LpProblem",
    "CappedSimplexQp",
    "SolveStatus",
    "solve_lp",
    "solve_capped_simplex_qp",
    "project_capped_simplex",
    "project_simplex",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITER_LIMIT = "iter_limit"


@dataclass
class LpProblem:
    """minimize (or maximize) c.z subject to A z <= b, E z = d, lo <= z <= hi.

    lo/hi entries may be +-inf; A/E may be None when absent.
    """

    c: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    E: np.ndarray | None = None
    d: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    maximize: bool = False


@dataclass
class CappedSimplexQp:
    """maximize 0.5 mu' Q mu + q' mu over {mu >= 0, sum(mu) <= beta};
    Q must be symmetric negative semidefinite."""

    Q: np.ndarray
    q: np.ndarray
    beta: float


@dataclass
class SolveStatus:
    status: str
    objective: float = float("nan")
    x: np.ndarray | None = None
    ineq_duals: np.ndarray | None = None
    eq_duals: np.ndarray | None = None
    kkt_residual: float = float("nan")


def _check_finite(name, arr, allow_inf=False):
    if arr is None:
        return None
    arr = np.asarray(arr, dtype=float)
    if np.any(np.isnan(arr)):
        raise ValueError(f"{name} contains NaN")
    if not allow_inf and np.any(np.isinf(arr)):
        raise ValueError(f"{name} contains infinite entries")
    return arr


def solve_lp(lp: LpProblem, tol: float = 1e-9) -> SolveStatus:
    """Solve a dense LP; returns primal point, duals, and a KKT residual.

    Infeasible/unbounded are statuses, not exceptions.  Duals follow the
    convention c + A' (-lam) stationarity for minimization, i.e. the returned
    ineq_duals are >= 0 multipliers of the rows A z <= b.
    """
    c = _check_finite("c", lp.c)
    A = _check_finite("A", lp.A)
    b = _check_finite("b", lp.b)
    E = _check_finite("E", lp.E)
    d = _check_finite("d", lp.d)
    n = len(c)
    lo = _check_finite("lo", lp.lo, allow_inf=True)
    hi = _check_finite("hi", lp.hi, allow_inf=True)
    if lo is None:
        lo = np.full(n, -np.inf)
    if hi is None:
        hi = np.full(n, np.inf)
    bounds = list(zip(lo, hi))
    c_solve = -c if lp.maximize else c

    res = linprog(c_solve, A_ub=A, b_ub=b, A_eq=E, b_eq=d, bounds=bounds, method="highs")
    if res.status == 2:
        return SolveStatus(status=INFEASIBLE)
    if res.status == 3:
        return SolveStatus(status=UNBOUNDED)
    if res.status != 0:
        return SolveStatus(status=ITER_LIMIT)

    x = np.asarray(res.x, dtype=float)
    lam = -np.asarray(res.ineqlin.marginals) if A is not None else np.zeros(0)
    nu = -np.asarray(res.eqlin.marginals) if E is not None else np.zeros(0)
    if lp.maximize:
        obj = float(c @ x)
    else:
        obj = float(res.fun)

    # KKT residual in the minimization convention
    grad = c_solve.copy()
    if A is not None and len(lam):
        grad += A.T @ lam
    if E is not None and len(nu):
        grad += E.T @ nu
    # reduced costs absorb the bound multipliers: at optimum the stationarity
    # gradient equals lower.marginals (>= 0 at lower) + upper.marginals (<= 0)
    grad -= np.asarray(res.lower.marginals) + np.asarray(res.upper.marginals)
    resid = float(np.max(np.abs(grad))) if n else 0.0
    if A is not None and len(lam):
        slack = b - A @ x
        resid = max(resid, float(np.max(np.maximum(-slack, 0.0))))
        resid = max(resid, float(np.max(np.abs(lam * slack))))
    if E is not None and len(nu):
        resid = max(resid, float(np.max(np.abs(E @ x - d))))
    return SolveStatus(
        status=OPTIMAL,
        objective=obj,
        x=x,
        ineq_duals=lam,
        eq_duals=nu,
        kkt_residual=resid,
    )


def project_simplex(v, total: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) = total} (sort-threshold)."""
    if total < 0:
        raise ValueError("total must be nonnegative")
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ks = np.arange(1, len(v) + 1)
    cond = u - css / ks > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_capped_simplex(v, beta: float) -> np.ndarray:
    """Euclidean projection onto {mu >= 0, sum(mu) <= beta}."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    v = np.asarray(v, dtype=float)
    w = np.maximum(v, 0.0)
    if w.sum() <= beta:
        return w
    return project_simplex(v, beta)


def _qp_objective(qp: CappedSimplexQp, mu: np.ndarray) -> float:
    return float(0.5 * mu @ qp.Q @ mu + qp.q @ mu)


def _face_solve(qp: CappedSimplexQp, support: np.ndarray, cap_active: bool) -> np.ndarray | None:
    """Exact stationary point on one face (fixed support, cap on/off);
    returns None when the face system is singular or the point leaves the set."""
    Q, q, beta = qp.Q, qp.q, qp.beta
    m = len(q)
    k = int(support.sum())
    if k == 0:
        return np.zeros(m)
    Qs = Q[np.ix_(support, support)]
    qs = q[support]
    if cap_active:
        # stationarity Q mu + q = eta * 1 on the support, sum = beta
        Ksys = np.zeros((k + 1, k + 1))
        Ksys[:k, :k] = Qs
        Ksys[:k, k] = -1.0
        Ksys[k, :k] = 1.0
        rhs = np.concatenate([-qs, [beta]])
    else:
        Ksys = Qs
        rhs = -qs
    try:
        sol = np.linalg.solve(Ksys, rhs)
    except np.linalg.LinAlgError:
        return None
    cand = np.zeros(m)
    cand[support] = sol[:k]
    if np.any(cand < -1e-12) or cand.sum() > beta + 1e-10:
        return None
    return project_capped_simplex(cand, beta)


def _qp_polish(qp: CappedSimplexQp, mu: np.ndarray, tol: float) -> np.ndarray | None:
    """Best exact face solve consistent with mu's support, trying the cap
    both active and inactive; returns None if neither face is valid."""
    support = mu > max(tol, 1e-12)
    candidates = [
        c
        for cap_active in (False, True)
        for c in (_face_solve(qp, support, cap_active),)
        if c is not None
    ]
    if not candidates:
        return None
    return max(candidates, key=lambda c: _qp_objective(qp, c))


def solve_capped_simplex_qp(
    qp: CappedSimplexQp, tol: float = 1e-9, max_iter: int = 10_000
) -> SolveStatus:
    """Projected gradient with exact projection and monotone line search.

    The fixed-point residual ||mu - proj(mu + grad)||_inf is the reported KKT
    residual.  A final exact solve on the identified face tightens the
    answer when the face guess is consistent.
    """
    Q = np.asarray(qp.Q, dtype=float)
    q = np.asarray(qp.q, dtype=float)
    if Q.shape != (len(q), len(q)):
        raise ValueError("Q/q dimension mismatch")
    if np.max(np.abs(Q - Q.T)) > 1e-12 * max(1.0, float(np.max(np.abs(Q)))):
        raise ValueError("Q must be symmetric")
    if qp.beta < 0:
        raise ValueError("beta must be nonnegative")
    eigs = np.linalg.eigvalsh(Q)
    scale = max(1.0, float(np.max(np.abs(eigs))) if len(eigs) else 0.0)
    if len(eigs) and eigs[-1] > 1e-9 * scale:
        raise ValueError("Q must be negative semidefinite")
    qp = CappedSimplexQp(Q=Q, q=q, beta=float(qp.beta))

    L = float(np.max(np.abs(eigs))) if len(eigs) else 0.0
    step = 1.0 / L if L > 0 else 1.0
    mu = project_capped_simplex(np.zeros_like(q), qp.beta)
    obj = _qp_objective(qp, mu)

    def residual(m_):
        g = Q @ m_ + q
        return float(np.max(np.abs(m_ - project_capped_simplex(m_ + g, qp.beta))))

    status = ITER_LIMIT
    for it in range(max_iter):
        g = Q @ mu + q
        trial_step = step
        for _ in range(40):
            cand = project_capped_simplex(mu + trial_step * g, qp.beta)
            cand_obj = _qp_objective(qp, cand)
            if cand_obj >= obj - 1e-15 * max(1.0, abs(obj)):
                break
            trial_step *= 0.5
        moved = float(np.max(np.abs(cand - mu)))
        mu, obj = cand, cand_obj
        if residual(mu) <= tol:
            status = OPTIMAL
            break
        # ill-conditioned faces make plain projected steps crawl; periodically
        # jump to the exact stationary point of the identified face
        if moved <= 1e-16 or it % 25 == 24:
            polished = _qp_polish(qp, mu, tol)
            if polished is not None:
                pol_obj = _qp_objective(qp, polished)
                if residual(polished) <= tol:
                    mu, obj, status = polished, pol_obj, OPTIMAL
                    break
                if pol_obj > obj:
                    mu, obj = polished, pol_obj
                    continue
            if moved <= 1e-16:
                break

    polished = _qp_polish(qp, mu, tol)
    if polished is not None:
        if _qp_objective(qp, polished) >= obj - 1e-12 and residual(polished) <= residual(mu):
            mu = polished
            if residual(mu) <= tol:
                status = OPTIMAL
    return SolveStatus(
        status=status,
        objective=_qp_objective(qp, mu),
        x=mu,
        kkt_residual=residual(mu),
    )
