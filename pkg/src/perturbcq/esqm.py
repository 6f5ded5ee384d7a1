"""Sequential quadratic method with an l-infinity slack penalty, plus a
homotopy driver that tracks the optimal value as the perturbation level
decreases toward zero.

Each iteration linearizes the constraints at the current point, adds a slack
s >= 0 penalized by beta, and proximally regularizes the step; the strongly
concave dual of that subproblem lives on the capped simplex
{mu >= 0, sum(mu) <= beta} and is solved exactly, after which the primal step
is recovered in closed form.  The penalty beta grows by delta whenever the
linearized system is infeasible at the current level.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .convexsolve import OPTIMAL, CappedSimplexQp, solve_capped_simplex_qp
from .model import PerturbationSpec, ProblemInstance
from .poly import Polynomial

__all__ = [
    "EsqmParams",
    "EsqmTrace",
    "HomotopyLevel",
    "HomotopyTrace",
    "estimate_lipschitz",
    "esqm_step",
    "run_esqm",
    "kkt_residual",
    "homotopy_run",
]

FEASIBILITY_TOL = 1e-6  # level reported infeasible beyond this final violation


@dataclass(frozen=True)
class EsqmParams:
    """Tuning knobs of one solver run at a fixed perturbation level alpha.

    curvature_obj / curvature_con must dominate the gradient Lipschitz
    constants of the objective / constraints on the region traversed; use
    estimate_lipschitz for a sampled bound.
    """

    alpha: float
    beta0: float = 1.0
    delta: float = 1.0
    curvature_obj: float = 1.0
    curvature_con: float = 1.0
    step_tol: float = 1e-9
    kkt_tol: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        if self.beta0 <= 0 or self.delta <= 0:
            raise ValueError("beta0 and delta must be positive")
        if self.curvature_obj <= 0 or self.curvature_con <= 0:
            raise ValueError("curvature parameters must be positive")
        if self.step_tol <= 0 or self.kkt_tol <= 0 or self.max_iter < 1:
            raise ValueError("tolerances and max_iter must be positive")


@dataclass
class EsqmTrace:
    """Per-iteration history of one run; index 0 is the starting point."""

    xs: list = field(default_factory=list)
    slacks: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    multipliers: list = field(default_factory=list)
    kkt_residuals: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    infeasibilities: list = field(default_factory=list)
    termination: str = ""
    converged: bool = False
    beta0_used: float = float("nan")
    retries: int = 0

    @property
    def x_final(self) -> np.ndarray:
        return np.asarray(self.xs[-1], dtype=float)

    def merit_values(self, f_min: float, alpha: float) -> list[float]:
        """(1/beta_k)(f(x_k) - f_min) + alpha + max(0, worst shifted constraint)
        at each iterate; nonincreasing along a well-configured run."""
        return [
            (obj - f_min) / beta + alpha + infeas
            for obj, beta, infeas in zip(self.objectives, self.betas, self.infeasibilities)
        ]

    def to_json_dict(self) -> dict:
        return {
            "xs": [list(map(float, x)) for x in self.xs],
            "slacks": list(map(float, self.slacks)),
            "betas": list(map(float, self.betas)),
            "multipliers": [list(map(float, m)) for m in self.multipliers],
            "kkt_residuals": list(map(float, self.kkt_residuals)),
            "objectives": list(map(float, self.objectives)),
            "infeasibilities": list(map(float, self.infeasibilities)),
            "termination": self.termination,
            "converged": self.converged,
            "beta0_used": self.beta0_used,
            "retries": self.retries,
        }

    def write_csv(self, path, f_min: float = 0.0, alpha: float = 0.0) -> None:
        merits = self.merit_values(f_min, alpha)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "x", "s", "beta", "kkt_residual", "merit"])
            for k, (x, s, beta, res, merit) in enumerate(
                zip(self.xs, self.slacks, self.betas, self.kkt_residuals, merits)
            ):
                writer.writerow(
                    [k, " ".join(f"{v:.17g}" for v in x), f"{s:.17g}",
                     f"{beta:.17g}", f"{res:.3e}", f"{merit:.17g}"]
                )


def estimate_lipschitz(
    prob: ProblemInstance, box=None, samples: int = 200, seed: int = 0
) -> tuple[float, list[float]]:
    """Sampled gradient-Lipschitz bounds (objective, one per inequality).

    Takes the largest Hessian spectral norm over the box corners plus
    `samples` uniform points, inflated by a 1.5 safety factor.
    """
    box = np.asarray(box if box is not None else prob.box_array(), dtype=float)
    if box.shape != (prob.num_vars, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be a nondegenerate interval per variable")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(box[:, 0], box[:, 1], size=(samples, prob.num_vars))
    if prob.num_vars <= 16:
        corners = np.array(list(itertools.product(*box)), dtype=float)
        pts = np.vstack([pts, corners])

    def bound(p: Polynomial) -> float:
        hess = p.hessian()
        worst = 0.0
        n = prob.num_vars
        H = np.empty((pts.shape[0], n, n))
        for a in range(n):
            for b in range(a, n):
                vals = hess[a][b].evaluate_many(pts)
                H[:, a, b] = vals
                H[:, b, a] = vals
        eigs = np.linalg.eigvalsh(H)
        worst = float(np.max(np.abs(eigs))) if eigs.size else 0.0
        return 1.5 * worst

    L_obj = bound(prob.objective) if prob.objective is not None else 0.0
    return L_obj, [bound(g) for g in prob.inequalities]


def _linearization_data(prob, f, x, bounds):
    grad_f = np.array([p.evaluate(x) for p in f.gradient()])
    c = np.array([g.evaluate(x) for g in prob.inequalities])
    A = np.array([[p.evaluate(x) for p in g.gradient()] for g in prob.inequalities])
    return grad_f, c - bounds, A


def esqm_step(
    prob: ProblemInstance, f: Polynomial, x_k, params: EsqmParams, beta_k: float
) -> tuple[np.ndarray, float, np.ndarray]:
    """One proximal linearized step at penalty beta_k.

    Solves the slack-penalized subproblem through its capped-simplex dual and
    recovers (next point, optimal slack, multipliers).
    """
    if beta_k <= 0:
        raise ValueError("beta_k must be positive")
    x_k = np.asarray(x_k, dtype=float)
    bounds = PerturbationSpec.diagonal(params.alpha).bounds(prob)
    grad_f, shifted, A = _linearization_data(prob, f, x_k, bounds)
    rho = params.curvature_obj + beta_k * params.curvature_con

    Q = -(A @ A.T) / rho
    Q = 0.5 * (Q + Q.T)
    q = shifted - A @ grad_f / rho
    status = solve_capped_simplex_qp(CappedSimplexQp(Q=Q, q=q, beta=beta_k), tol=1e-10)
    if status.status != OPTIMAL:
        raise RuntimeError(f"subproblem dual did not solve: {status.status}")
    mu = status.x
    y = x_k - (grad_f + A.T @ mu) / rho
    s = max(0.0, float(np.max(shifted + A @ (y - x_k))))
    return y, s, mu


def kkt_residual(prob: ProblemInstance, f: Polynomial, x, lam,
                 pert: PerturbationSpec) -> float:
    """max of stationarity, complementarity, and feasibility violations at
    (x, lam) for the perturbed problem."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("multipliers must be nonnegative")
    bounds = pert.bounds(prob)
    grad = np.array([p.evaluate(x) for p in f.gradient()])
    vals = np.array([g.evaluate(x) for g in prob.inequalities])
    for lam_i, g in zip(lam, prob.inequalities):
        grad += lam_i * np.array([p.evaluate(x) for p in g.gradient()])
    stationarity = float(np.max(np.abs(grad)))
    comp = float(np.max(np.abs(lam * (vals - bounds)))) if len(lam) else 0.0
    feas = float(np.max(np.maximum(vals - bounds, 0.0)))
    return max(stationarity, comp, feas)


def _single_run(prob, f, x0, params: EsqmParams) -> EsqmTrace:
    bounds = PerturbationSpec.diagonal(params.alpha).bounds(prob)
    pert = PerturbationSpec.diagonal(params.alpha)
    x = np.asarray(x0, dtype=float)
    beta = params.beta0
    trace = EsqmTrace(beta0_used=params.beta0)

    def record(x_, s_, beta_, mu_):
        vals = np.array([g.evaluate(x_) for g in prob.inequalities])
        trace.xs.append(tuple(x_))
        trace.slacks.append(float(s_))
        trace.betas.append(float(beta_))
        trace.multipliers.append(tuple(mu_))
        trace.kkt_residuals.append(kkt_residual(prob, f, x_, mu_, pert))
        trace.objectives.append(float(f.evaluate(x_)))
        trace.infeasibilities.append(float(np.max(np.maximum(vals - bounds, 0.0))))

    record(x, 0.0, beta, np.zeros(len(prob.inequalities)))
    for _ in range(params.max_iter):
        y, s, mu = esqm_step(prob, f, x, params, beta)
        # penalty update: keep beta only if every linearization at the old
        # point is satisfied at the new point without slack
        _, shifted, A = _linearization_data(prob, f, x, bounds)
        lin_ok = bool(np.all(shifted + A @ (y - x) <= 1e-12))
        step = float(np.linalg.norm(y - x))
        x = y
        beta_next = beta if lin_ok else beta + params.delta
        record(x, s, beta_next, mu)
        if step <= params.step_tol and trace.kkt_residuals[-1] <= params.kkt_tol:
            trace.termination = "converged"
            trace.converged = True
            return trace
        beta = beta_next
    trace.termination = "max_iter"
    return trace


def run_esqm(prob: ProblemInstance, f: Polynomial | None, x0, params: EsqmParams) -> EsqmTrace:
    """Full solver run at a fixed level.

    The initial penalty must exceed a problem-dependent threshold for the
    iteration to settle; when a run exhausts its budget while the penalty is
    still climbing, it is restarted with beta0 scaled by 10 (up to 3 times).
    """
    if prob.equalities:
        raise ValueError("run_esqm supports inequality-only problems")
    f = f if f is not None else prob.objective
    if f is None:
        raise ValueError("an objective is required")
    params_try = params
    trace = _single_run(prob, f, x0, params_try)
    retries = 0
    while (
        not trace.converged
        and retries < 3
        and len(trace.betas) >= 2
        and trace.betas[-1] > trace.betas[max(0, len(trace.betas) - 10)]
    ):
        retries += 1
        params_try = replace(params_try, beta0=params_try.beta0 * 10.0)
        trace = _single_run(prob, f, x0, params_try)
    trace.retries = retries
    return trace


@dataclass
class HomotopyLevel:
    alpha: float
    x: tuple[float, ...]
    value: float
    status: str  # "converged" | "stalled" | "infeasible"
    trace: EsqmTrace


@dataclass
class HomotopyTrace:
    levels: list[HomotopyLevel] = field(default_factory=list)

    @property
    def values(self) -> list[float]:
        return [lvl.value for lvl in self.levels]

    def to_json_dict(self) -> dict:
        return {
            "levels": [
                {
                    "alpha": lvl.alpha,
                    "x": list(lvl.x),
                    "value": lvl.value,
                    "status": lvl.status,
                    "trace": lvl.trace.to_json_dict(),
                }
                for lvl in self.levels
            ]
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def homotopy_run(
    prob: ProblemInstance, f: Polynomial | None, alpha_schedule, params_template: EsqmParams
) -> HomotopyTrace:
    """Solve a strictly decreasing schedule of levels, warm-starting each from
    the previous solution; the penalty resets per level.

    Levels whose final point stays infeasible are flagged "infeasible";
    feasible non-converged levels are flagged "stalled" (a hint that the level
    may be a singular one)."""
    schedule = [float(a) for a in alpha_schedule]
    if not schedule or any(a <= 0 for a in schedule):
        raise ValueError("schedule must be positive")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly decreasing")
    f = f if f is not None else prob.objective
    if f is None:
        raise ValueError("an objective is required")

    out = HomotopyTrace()
    box = prob.box_array()
    x = box.mean(axis=1)
    for alpha in schedule:
        params = replace(params_template, alpha=alpha, beta0=params_template.beta0)
        trace = run_esqm(prob, f, x, params)
        xf = trace.x_final
        if trace.infeasibilities[-1] > FEASIBILITY_TOL:
            status = "infeasible"
        elif trace.converged:
            status = "converged"
        else:
            status = "stalled"
        out.levels.append(
            HomotopyLevel(
                alpha=alpha,
                x=tuple(xf),
                value=float(f.evaluate(xf)),
                status=status,
                trace=trace,
            )
        )
        if status != "infeasible":
            x = xf
    return out
