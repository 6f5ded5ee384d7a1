"""MFCQ certification: separating-direction LP, convex-hull distance QP,
equality-gradient rank test, and a boundary sweep."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .convexsolve import OPTIMAL, LpProblem, project_simplex, solve_lp
from .model import (
    DEFAULT_ACTIVE_TOL,
    ActiveSet,
    PerturbationSpec,
    ProblemInstance,
    active_set,
    feasibility_residual,
)

__all__ = [
    "MfcqCertificate",
    "SweepConfig",
    "SweepResult",
    "equality_gradients_independent",
    "check_mfcq_lp",
    "check_mfcq_hull",
    "sweep_mfcq",
    "write_sweep_csv",
]

HOLDS = "holds"
FAILS = "fails"
DEGENERATE = "degenerate"

DEFAULT_MARGIN_TOL = 1e-9
DEFAULT_CERT_TOL = 1e-8


@dataclass(frozen=True)
class MfcqCertificate:
    """Outcome of an MFCQ check at one point.

    Holds carries a direction y with margin eps (<y, grad g_i> <= -eps on the
    active set, <y, grad h_j> ~ 0, ||y||_inf <= 1; eps = inf when nothing is
    active).  Fails carries simplex multipliers lam on the active set and
    span coefficients kappa with || sum lam_i grad g_i - sum kappa_j grad h_j ||
    below the certificate tolerance.
    """

    verdict: str
    active: ActiveSet
    direction: tuple[float, ...] | None = None
    margin: float | None = None
    multipliers: tuple[float, ...] | None = None
    kappa: tuple[float, ...] | None = None
    hull_distance: float | None = None
    reason: str = ""
    margin_tol: float = DEFAULT_MARGIN_TOL
    cert_tol: float = DEFAULT_CERT_TOL

    @property
    def measure(self) -> float:
        """Signed scalar summary: margin when holding, -hull distance slack
        otherwise (0 for a clean failure)."""
        if self.verdict == HOLDS:
            return self.margin if self.margin is not None else math.inf
        return -(self.hull_distance or 0.0)


def _gradient_matrix(polys, x) -> np.ndarray:
    if not polys:
        return np.zeros((0, len(x)))
    return np.array([[g.evaluate(x) for g in p.gradient()] for p in polys])


def equality_gradients_independent(
    prob: ProblemInstance, x, tol_rank: float = 1e-9
) -> bool:
    """Numerical full-rank test of the equality gradient matrix at x."""
    x = np.asarray(x, dtype=float)
    r = len(prob.equalities)
    if r == 0:
        return True
    if r > prob.num_vars:
        return False
    H = _gradient_matrix(prob.equalities, x)
    sv = np.linalg.svd(H, compute_uv=False)
    return bool(sv[-1] > tol_rank * max(1.0, sv[0]))


def _prepare(prob, pert, x, tau_act):
    x = np.asarray(x, dtype=float)
    act = active_set(prob, pert, x, tau_act)  # raises on infeasible x
    G = _gradient_matrix([prob.inequalities[i] for i in act.indices], x)
    H = _gradient_matrix(prob.equalities, x)
    return x, act, G, H


def _fit_kappa(H: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares kappa with sum kappa_j grad h_j ~ w; returns residual norm."""
    if H.shape[0] == 0:
        return np.zeros(0), float(np.linalg.norm(w))
    kappa, *_ = np.linalg.lstsq(H.T, w, rcond=None)
    return kappa, float(np.linalg.norm(w - H.T @ kappa))


def check_mfcq_lp(
    prob: ProblemInstance,
    pert: PerturbationSpec,
    x,
    tau_act: float = DEFAULT_ACTIVE_TOL,
    tol: float = DEFAULT_MARGIN_TOL,
    cert_tol: float = DEFAULT_CERT_TOL,
) -> MfcqCertificate:
    """Separating-direction formulation: maximize eps subject to
    <grad g_i, y> <= -eps on the active set, <grad h_j, y> = 0, ||y||_inf <= 1.

    eps* > tol certifies MFCQ with the optimal (y, eps).  Otherwise the dual
    multipliers are normalized onto the simplex and, when they reproduce a
    vanishing combination of gradients to cert_tol, the point is a certified
    failure; a tiny eps* without a clean dual witness is reported degenerate.
    """
    x, act, G, H = _prepare(prob, pert, x, tau_act)
    if not equality_gradients_independent(prob, x):
        kappa, _ = _fit_kappa(H, np.zeros(prob.num_vars))
        return MfcqCertificate(
            verdict=FAILS,
            active=act,
            reason="equality gradients linearly dependent",
            margin_tol=tol,
            cert_tol=cert_tol,
        )
    k = len(act.indices)
    n = prob.num_vars
    if k == 0:
        return MfcqCertificate(
            verdict=HOLDS,
            active=act,
            direction=tuple(0.0 for _ in range(n)),
            margin=math.inf,
            margin_tol=tol,
            cert_tol=cert_tol,
        )
    # variables z = (y, eps)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A = np.hstack([G, np.ones((k, 1))])
    b = np.zeros(k)
    E = np.hstack([H, np.zeros((H.shape[0], 1))]) if H.shape[0] else None
    d = np.zeros(H.shape[0]) if H.shape[0] else None
    lo = np.concatenate([-np.ones(n), [-np.inf]])
    hi = np.concatenate([np.ones(n), [np.inf]])
    status = solve_lp(
        LpProblem(c=c, A=A, b=b, E=E, d=d, lo=lo, hi=hi, maximize=True)
    )
    if status.status != OPTIMAL:
        raise RuntimeError(f"MFCQ LP did not solve: {status.status}")
    eps = float(status.objective)
    y = status.x[:n]
    if eps > tol:
        return MfcqCertificate(
            verdict=HOLDS,
            active=act,
            direction=tuple(y),
            margin=eps,
            margin_tol=tol,
            cert_tol=cert_tol,
        )
    lam = np.maximum(np.asarray(status.ineq_duals, dtype=float), 0.0)
    total = lam.sum()
    lam = lam / total if total > 0 else np.full(k, 1.0 / k)
    w = G.T @ lam
    kappa, resid = _fit_kappa(H, w)
    verdict = FAILS if resid <= cert_tol else DEGENERATE
    return MfcqCertificate(
        verdict=verdict,
        active=act,
        direction=tuple(y),
        margin=eps,
        multipliers=tuple(lam),
        kappa=tuple(kappa),
        hull_distance=resid,
        margin_tol=tol,
        cert_tol=cert_tol,
    )


def _min_quad_simplex(M: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    """Minimize lam' M lam over the unit simplex (M PSD); returns (lam, value).

    Projected gradient with a final exact solve on the identified support.
    """
    k = M.shape[0]
    lam = np.full(k, 1.0 / k)
    eigs = np.linalg.eigvalsh(M)
    L = 2.0 * max(float(eigs[-1]), 1e-30)
    val = float(lam @ M @ lam)
    for _ in range(5000):
        grad = 2.0 * M @ lam
        cand = project_simplex(lam - grad / L, 1.0)
        cand_val = float(cand @ M @ cand)
        moved = float(np.max(np.abs(cand - lam)))
        lam, val = cand, cand_val
        if moved <= 1e-14:
            break
    support = lam > 1e-12
    ks = int(support.sum())
    if ks:
        # stationarity 2 M lam = eta 1 on the support, sum lam = 1
        sys = np.zeros((ks + 1, ks + 1))
        sys[:ks, :ks] = 2.0 * M[np.ix_(support, support)]
        sys[:ks, ks] = -1.0
        sys[ks, :ks] = 1.0
        rhs = np.zeros(ks + 1)
        rhs[ks] = 1.0
        try:
            sol = np.linalg.solve(sys, rhs)
            cand = np.zeros(k)
            cand[support] = sol[:ks]
            if np.all(cand >= -1e-12):
                cand = project_simplex(cand, 1.0)
                cand_val = float(cand @ M @ cand)
                if cand_val <= val + 1e-15:
                    lam, val = cand, cand_val
        except np.linalg.LinAlgError:
            pass
    return lam, max(val, 0.0)


def check_mfcq_hull(
    prob: ProblemInstance,
    pert: PerturbationSpec,
    x,
    tau_act: float = DEFAULT_ACTIVE_TOL,
    tol: float = DEFAULT_CERT_TOL,
    degenerate_band: float = 10.0,
) -> MfcqCertificate:
    """Convex-hull formulation: distance from span{grad h} to the hull of the
    active gradients.  Equality directions are eliminated by orthogonal
    projection; the verdict is Fails when the minimized distance is <= tol,
    Degenerate inside (tol, degenerate_band*tol], Holds beyond.
    """
    x, act, G, H = _prepare(prob, pert, x, tau_act)
    if not equality_gradients_independent(prob, x):
        return MfcqCertificate(
            verdict=FAILS,
            active=act,
            reason="equality gradients linearly dependent",
            cert_tol=tol,
        )
    k = len(act.indices)
    if k == 0:
        return MfcqCertificate(
            verdict=HOLDS, active=act, hull_distance=math.inf, cert_tol=tol
        )
    if H.shape[0]:
        # orthonormal basis of span{grad h}; project gradients onto complement
        Qb, _ = np.linalg.qr(H.T)
        Gp = G - (G @ Qb) @ Qb.T
    else:
        Gp = G
    M = Gp @ Gp.T
    lam, val = _min_quad_simplex(M, tol)
    dist = math.sqrt(max(val, 0.0))
    w = G.T @ lam
    kappa, _ = _fit_kappa(H, w - Gp.T @ lam)
    if dist <= tol:
        verdict = FAILS
    elif dist <= degenerate_band * tol:
        verdict = DEGENERATE
    else:
        verdict = HOLDS
    return MfcqCertificate(
        verdict=verdict,
        active=act,
        multipliers=tuple(lam),
        kappa=tuple(kappa),
        hull_distance=dist,
        cert_tol=tol,
    )


# ---------------------------------------------------------------------------
# boundary sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepConfig:
    samples: int = 1000
    seed: int = 0
    tau_act: float = DEFAULT_ACTIVE_TOL
    tol: float = DEFAULT_MARGIN_TOL
    cert_tol: float = DEFAULT_CERT_TOL
    bisect_iters: int = 60
    interior_attempts: int = 20000
    extra_points: tuple = ()  # user probe points certified alongside samples


@dataclass
class SweepRow:
    sample_id: int
    x: tuple[float, ...]
    certificate: MfcqCertificate


@dataclass
class SweepResult:
    status: str  # "ok" | "infeasible"
    rows: list[SweepRow] = field(default_factory=list)
    worst_margin: float = math.inf

    @property
    def verdicts(self) -> dict:
        out = {HOLDS: 0, FAILS: 0, DEGENERATE: 0}
        for row in self.rows:
            out[row.certificate.verdict] += 1
        return out

    @property
    def all_hold(self) -> bool:
        counts = self.verdicts
        return counts[FAILS] == 0 and counts[DEGENERATE] == 0 and bool(self.rows)


def _find_interior_point(prob, pert, rng, attempts) -> np.ndarray | None:
    box = prob.box_array()
    b = pert.bounds(prob)
    best, best_val = None, 0.0
    batch = 512
    done = 0
    while done < attempts:
        pts = rng.uniform(box[:, 0], box[:, 1], size=(batch, prob.num_vars))
        vals = np.full(batch, -np.inf)
        stacked = np.stack(
            [g.evaluate_many(pts) - bi for g, bi in zip(prob.inequalities, b)]
        )
        vals = stacked.max(axis=0)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best, best_val = pts[i], float(vals[i])
        if best_val < -1e-6:
            return best
        done += batch
    return best if best_val < -1e-9 else None


def sweep_mfcq(
    prob: ProblemInstance,
    pert: PerturbationSpec,
    config: SweepConfig | None = None,
) -> SweepResult:
    """Certify MFCQ at sampled boundary points of the perturbed feasible set.

    Points are generated by shooting random rays from a strictly feasible
    interior point and bisecting to the feasibility boundary; rays that exit
    the sample box while still feasible are discarded (no constraint is
    active there).  Equality-constrained problems are not swept.
    """
    if prob.equalities:
        raise ValueError("sweep_mfcq supports inequality-only problems")
    config = config or SweepConfig()
    rng = np.random.default_rng(config.seed)
    b = pert.bounds(prob)
    box = prob.box_array()

    x0 = _find_interior_point(prob, pert, rng, config.interior_attempts)
    if x0 is None:
        return SweepResult(status="infeasible")

    def violation_many(P: np.ndarray) -> np.ndarray:
        return np.max(
            np.stack([g.evaluate_many(P) - bi for g, bi in zip(prob.inequalities, b)]),
            axis=0,
        )

    span = float(np.max(box[:, 1] - box[:, 0]))
    rows: list[SweepRow] = []
    worst = math.inf
    produced = 0
    attempts = 0
    while produced < config.samples and attempts < 20 * config.samples:
        batch = min(max(256, config.samples), config.samples - produced + 64)
        attempts += batch
        dirs = rng.normal(size=(batch, prob.num_vars))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        # expand each ray until it leaves feasibility or the box
        t_lo = np.zeros(batch)
        t = np.full(batch, 0.25 * span)
        t_hi = np.full(batch, np.nan)
        alive = np.ones(batch, dtype=bool)
        for _ in range(60):
            if not alive.any():
                break
            pts = x0 + t[:, None] * dirs
            inbox = np.all((pts >= box[:, 0]) & (pts <= box[:, 1]), axis=1)
            infeasible = violation_many(pts) > 0
            hit = alive & inbox & infeasible
            t_hi[hit] = t[hit]
            alive &= inbox & ~infeasible  # rays exiting the box are dropped
            t_lo[alive] = t[alive]
            t[alive] *= 2.0
        keep = ~np.isnan(t_hi)
        t_lo, t_hi, dirs = t_lo[keep], t_hi[keep], dirs[keep]
        for _ in range(config.bisect_iters):
            mid = 0.5 * (t_lo + t_hi)
            bad = violation_many(x0 + mid[:, None] * dirs) > 0
            t_hi = np.where(bad, mid, t_hi)
            t_lo = np.where(bad, t_lo, mid)
        for xb in x0 + t_lo[:, None] * dirs:
            if produced >= config.samples:
                break
            try:
                cert = check_mfcq_lp(
                    prob, pert, xb, tau_act=config.tau_act, tol=config.tol,
                    cert_tol=config.cert_tol,
                )
            except ValueError:
                continue
            rows.append(SweepRow(sample_id=produced, x=tuple(xb), certificate=cert))
            worst = min(worst, cert.measure)
            produced += 1

    for j, pt in enumerate(config.extra_points):
        pt = np.asarray(pt, dtype=float)
        ineq, eq = feasibility_residual(prob, pert, pt)
        if max(ineq, eq) > config.tau_act:
            continue
        cert = check_mfcq_lp(
            prob, pert, pt, tau_act=config.tau_act, tol=config.tol,
            cert_tol=config.cert_tol,
        )
        rows.append(SweepRow(sample_id=config.samples + j, x=tuple(pt), certificate=cert))
        worst = min(worst, cert.measure)

    return SweepResult(status="ok", rows=rows, worst_margin=worst)


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "x", "verdict", "margin_or_distance", "active_indices"])
        for row in result.rows:
            cert = row.certificate
            value = cert.margin if cert.verdict == HOLDS else cert.hull_distance
            writer.writerow(
                [
                    row.sample_id,
                    " ".join(f"{v:.17g}" for v in row.x),
                    cert.verdict,
                    "" if value is None else f"{value:.17g}",
                    " ".join(str(i) for i in cert.active.indices),
                ]
            )
