"""Enumeration of singular diagonal perturbation levels.

A level alpha is singular when some feasible point of the perturbed set
admits a vanishing convex combination of active inequality gradients (modulo
the span of equality gradients).  For each candidate activity pattern (K, L)
— K the support of the combination, L the full active set — the witness
equations form a polynomial system in (x, lambda, kappa, alpha) that is
solved by multi-start Levenberg-Marquardt.  Closed-form oracles are provided
for the ball-with-box and grid-of-boxes catalog families, together with the
degree-based upper bound on the number of singular levels.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance

__all__ = [
    "SingularSystem",
    "SingularWitness",
    "ScanReport",
    "milnor_thom_bound",
    "build_singular_system",
    "solve_system_multistart",
    "scan_singular",
    "analytic_singulars_ball_box",
    "analytic_singulars_grid",
]

RESIDUAL_TOL = 1e-10     # acceptance threshold for a raw multi-start solution
WITNESS_RESIDUAL = 1e-8  # every reported witness must re-verify below this
LAMBDA_MIN = 1e-10       # strict-positivity margin on the weights
SIGMA_SLACK = 1e-9       # strict-slack margin on constraints outside L
DEDUP_TOL = 1e-6         # alpha clustering width
WINDOW_EDGE = 1e-9       # scan windows are open: edges excluded by this margin
PATTERN_GUARD = 12       # refuse subset enumeration beyond 3^12 patterns


def milnor_thom_bound(n: int, m: int, d: int, r: int = 0) -> int:
    """Upper bound d*(2d-1)^(n+r)*(2d+1)^m on the number of singular levels
    of a system of m inequalities and r equalities of degree <= d in n
    variables.  Exact integer arithmetic."""
    if n < 1 or m < 1 or d < 1 or r < 0:
        raise ValueError("need n >= 1, m >= 1, d >= 1, r >= 0")
    return d * (2 * d - 1) ** (n + r) * (2 * d + 1) ** m


@dataclass(frozen=True)
class SingularWitness:
    """A certified solution of the witness system for pattern (K, L):
    the constraints in L are active at x under level alpha, and the gradients
    indexed by K admit the vanishing combination with weights lam (and
    equality coefficients kappa)."""

    alpha: float
    x: tuple[float, ...]
    lam: tuple[float, ...]
    kappa: tuple[float, ...]
    K: tuple[int, ...]
    L: tuple[int, ...]
    residual_norm: float
    side_conditions_ok: bool

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "x": list(self.x),
            "lambda": list(self.lam),
            "kappa": list(self.kappa),
            "K": list(self.K),
            "L": list(self.L),
            "residual_norm": self.residual_norm,
            "side_conditions_ok": self.side_conditions_ok,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SingularWitness":
        return cls(
            alpha=float(data["alpha"]),
            x=tuple(data["x"]),
            lam=tuple(data["lambda"]),
            kappa=tuple(data["kappa"]),
            K=tuple(data["K"]),
            L=tuple(data["L"]),
            residual_norm=float(data["residual_norm"]),
            side_conditions_ok=bool(data["side_conditions_ok"]),
        )


class SingularSystem:
    """Residual map of the witness equations for one activity pattern.

    Unknowns z = (x, lam_K, kappa, alpha), in that order.  Rows:
      [0, n)            sum_{i in K} lam_i grad g_i(x) - sum_j kappa_j grad h_j(x)
      [n]               sum lam_i - 1
      [n+1, n+1+|L|)    g_j(x) - alpha for perturbable j in L, g_j(x) otherwise
      trailing r rows   h_j(x)
    Evaluation is vectorized over a batch of unknown vectors.
    """

    def __init__(self, prob: ProblemInstance, K, L):
        K = tuple(sorted(set(int(i) for i in K)))
        L = tuple(sorted(set(int(j) for j in L)))
        m = len(prob.inequalities)
        if not K or any(i < 0 or i >= m for i in K):
            raise ValueError("K must be a nonempty subset of the inequality indices")
        if not set(K) <= set(L) or any(j < 0 or j >= m for j in L):
            raise ValueError("L must contain K and stay within the inequality indices")
        pert = set(prob.perturbable)
        if not pert & set(K):
            raise ValueError(
                "K must include a perturbable index; a combination supported on "
                "fixed constraints cannot witness a diagonal singularity"
            )
        self.prob = prob
        self.K = K
        self.L = L
        n = prob.num_vars
        r = len(prob.equalities)
        self.n, self.r = n, r
        self.num_unknowns = n + len(K) + r + 1
        self.num_rows = n + 1 + len(L) + r
        self._L_perturbed = tuple(j in pert for j in L)

        self._gK = [prob.inequalities[i] for i in K]
        self._gK_grad = [g.gradient() for g in self._gK]
        self._gK_hess = [g.hessian() for g in self._gK]
        self._gL = [prob.inequalities[j] for j in L]
        self._gL_grad = [g.gradient() for g in self._gL]
        self._h = list(prob.equalities)
        self._h_grad = [h.gradient() for h in self._h]
        self._h_hess = [h.hessian() for h in self._h]

    # --- batched evaluation helpers ---------------------------------------

    def _split(self, Z: np.ndarray):
        n, k, r = self.n, len(self.K), self.r
        return Z[:, :n], Z[:, n : n + k], Z[:, n + k : n + k + r], Z[:, -1]

    @staticmethod
    def _grad_at(grads, X) -> np.ndarray:
        return np.stack([g.evaluate_many(X) for g in grads], axis=1)  # (S, n)

    @staticmethod
    def _hess_at(hess, X) -> np.ndarray:
        n = len(hess)
        S = X.shape[0]
        out = np.empty((S, n, n))
        for a in range(n):
            for b in range(a, n):
                vals = hess[a][b].evaluate_many(X)
                out[:, a, b] = vals
                out[:, b, a] = vals
        return out

    def residual_batch(self, Z: np.ndarray) -> np.ndarray:
        X, Lam, Kap, Alpha = self._split(Z)
        S = Z.shape[0]
        F = np.empty((S, self.num_rows))
        stat = np.zeros((S, self.n))
        for idx, grads in enumerate(self._gK_grad):
            stat += Lam[:, idx : idx + 1] * self._grad_at(grads, X)
        for j, grads in enumerate(self._h_grad):
            stat -= Kap[:, j : j + 1] * self._grad_at(grads, X)
        F[:, : self.n] = stat
        F[:, self.n] = Lam.sum(axis=1) - 1.0
        for pos, (g, perturbed) in enumerate(zip(self._gL, self._L_perturbed)):
            vals = g.evaluate_many(X)
            F[:, self.n + 1 + pos] = vals - Alpha if perturbed else vals
        for j, h in enumerate(self._h):
            F[:, self.n + 1 + len(self.L) + j] = h.evaluate_many(X)
        return F

    def jacobian_batch(self, Z: np.ndarray) -> np.ndarray:
        X, Lam, Kap, _ = self._split(Z)
        S = Z.shape[0]
        n, k, r = self.n, len(self.K), self.r
        J = np.zeros((S, self.num_rows, self.num_unknowns))
        # stationarity rows
        for idx in range(k):
            Gi = self._grad_at(self._gK_grad[idx], X)
            J[:, :n, :n] += Lam[:, idx, None, None] * self._hess_at(self._gK_hess[idx], X)
            J[:, :n, n + idx] = Gi
        for j in range(r):
            Hj = self._grad_at(self._h_grad[j], X)
            J[:, :n, :n] -= Kap[:, j, None, None] * self._hess_at(self._h_hess[j], X)
            J[:, :n, n + k + j] = -Hj
        # normalization row
        J[:, n, n : n + k] = 1.0
        # activity rows
        for pos, (grads, perturbed) in enumerate(zip(self._gL_grad, self._L_perturbed)):
            row = n + 1 + pos
            J[:, row, :n] = self._grad_at(grads, X)
            if perturbed:
                J[:, row, -1] = -1.0
        # equality rows
        for j in range(r):
            row = n + 1 + len(self.L) + j
            J[:, row, :n] = self._grad_at(self._h_grad[j], X)
        return J

    def residual(self, x, lam, kappa, alpha) -> np.ndarray:
        z = np.concatenate(
            [np.atleast_1d(np.asarray(v, dtype=float)).ravel() for v in (x, lam, kappa, [alpha])]
        )
        return self.residual_batch(z[None, :])[0]

    # --- side conditions ----------------------------------------------------

    def side_margins(self, x, lam, alpha) -> tuple[float, float]:
        """(min lambda entry, min strict-slack margin over constraints not in L)."""
        lam = np.asarray(lam, dtype=float)
        x = np.asarray(x, dtype=float)
        pert = set(self.prob.perturbable)
        margins = []
        for ell, g in enumerate(self.prob.inequalities):
            if ell in self.L:
                continue
            bound = alpha if ell in pert else 0.0
            margins.append(bound - g.evaluate(x))
        slack = min(margins) if margins else math.inf
        return float(lam.min()), float(slack)


def build_singular_system(prob: ProblemInstance, K, L) -> SingularSystem:
    """Assemble the witness system for activity pattern (K, L)."""
    return SingularSystem(prob, K, L)


def _levenberg_marquardt(system: SingularSystem, Z0: np.ndarray,
                         max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Damped least-squares iteration on a batch of starts; returns the final
    batch and its residual 2-norms."""
    Z = np.array(Z0, dtype=float)
    S, p = Z.shape
    nu = np.full(S, 1e-3)
    F = system.residual_batch(Z)
    fsq = np.einsum("sr,sr->s", F, F)
    eye = np.eye(p)
    for _ in range(max_iter):
        if np.all((fsq <= RESIDUAL_TOL**2) | (nu >= 1e8)):
            break
        J = system.jacobian_batch(Z)
        A = np.einsum("srp,srq->spq", J, J) + nu[:, None, None] * eye
        rhs = -np.einsum("srp,sr->sp", J, F)
        delta = np.linalg.solve(A, rhs[:, :, None])[:, :, 0]
        Znew = Z + delta
        Fnew = system.residual_batch(Znew)
        fnew = np.einsum("sr,sr->s", Fnew, Fnew)
        better = fnew < fsq
        Z[better] = Znew[better]
        F[better] = Fnew[better]
        fsq[better] = fnew[better]
        nu = np.clip(np.where(better, nu / 3.0, nu * 2.0), 1e-14, 1e9)
    return Z, np.sqrt(np.maximum(fsq, 0.0))


def _random_starts(system: SingularSystem, window, starts: int, rng) -> np.ndarray:
    box = system.prob.box_array()
    n, k, r = system.n, len(system.K), system.r
    X = rng.uniform(box[:, 0], box[:, 1], size=(starts, n))
    Lam = rng.dirichlet(np.ones(k), size=starts)
    Kap = rng.normal(size=(starts, r)) if r else np.zeros((starts, 0))
    Alpha = rng.uniform(window[0], window[1], size=(starts, 1))
    return np.hstack([X, Lam, Kap, Alpha])


def _classify(system: SingularSystem, z: np.ndarray, resid: float, window,
              box_slack: float) -> SingularWitness | None:
    """Turn one converged vector into a witness, or drop it.

    Returns None for residual failures, out-of-window alpha (window is open),
    points escaping the sample box, or clearly violated side conditions;
    borderline side conditions yield a witness flagged not-ok."""
    if resid > RESIDUAL_TOL:
        return None
    n, k, r = system.n, len(system.K), system.r
    x = z[:n]
    lam = z[n : n + k]
    kappa = z[n + k : n + k + r]
    alpha = float(z[-1])
    if not (window[0] + WINDOW_EDGE < alpha < window[1] - WINDOW_EDGE):
        return None
    box = system.prob.box_array()
    if np.any(x < box[:, 0] - box_slack) or np.any(x > box[:, 1] + box_slack):
        return None
    lam_min, slack = system.side_margins(x, lam, alpha)
    if lam_min < -1e-7 or slack < -1e-7:
        return None
    ok = lam_min >= LAMBDA_MIN and slack >= SIGMA_SLACK
    return SingularWitness(
        alpha=alpha,
        x=tuple(x),
        lam=tuple(lam),
        kappa=tuple(kappa),
        K=system.K,
        L=system.L,
        residual_norm=float(resid),
        side_conditions_ok=ok,
    )


def solve_system_multistart(
    system: SingularSystem, window, starts: int, seed
) -> list[SingularWitness]:
    """Solve one witness system from `starts` random initial points.

    Returns the surviving solutions (window-interior, in-box, residual below
    tolerance); strict side conditions are recorded in side_conditions_ok.
    An empty list is a valid outcome."""
    rng = np.random.default_rng(seed)
    Z0 = _random_starts(system, window, starts, rng)
    Z, resids = _levenberg_marquardt(system, Z0)
    span = float(np.max(np.diff(system.prob.box_array(), axis=1)))
    out = []
    for z, resid in zip(Z, resids):
        w = _classify(system, z, float(resid), window, box_slack=1e-6 * span)
        if w is not None:
            out.append(w)
    return out


@dataclass
class ScanReport:
    """Deduplicated singular levels found in a window, with witnesses."""

    problem: str
    window: tuple[float, float]
    singular_values: list[SingularWitness]
    uncertain: list[SingularWitness]
    bound: int
    starts_used: int
    seed: int

    @property
    def alphas(self) -> list[float]:
        return [w.alpha for w in self.singular_values]

    def to_json_dict(self) -> dict:
        return {
            "problem": self.problem,
            "window": list(self.window),
            "singular_values": [w.to_json_dict() for w in self.singular_values],
            "uncertain": [w.to_json_dict() for w in self.uncertain],
            "bound": self.bound,
            "starts_used": self.starts_used,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ScanReport":
        return cls(
            problem=data["problem"],
            window=tuple(data["window"]),
            singular_values=[SingularWitness.from_json_dict(w) for w in data["singular_values"]],
            uncertain=[SingularWitness.from_json_dict(w) for w in data["uncertain"]],
            bound=int(data["bound"]),
            starts_used=int(data["starts_used"]),
            seed=int(data["seed"]),
        )

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "K", "L", "residual", "x"])
            for w in self.singular_values:
                writer.writerow(
                    [
                        f"{w.alpha:.17g}",
                        " ".join(map(str, w.K)),
                        " ".join(map(str, w.L)),
                        f"{w.residual_norm:.3e}",
                        " ".join(f"{v:.17g}" for v in w.x),
                    ]
                )


def _enumerate_patterns(prob: ProblemInstance):
    m = len(prob.inequalities)
    pert = set(prob.perturbable)
    indices = list(range(m))
    for ksize in range(1, m + 1):
        for K in itertools.combinations(indices, ksize):
            if not pert & set(K):
                continue
            rest = [j for j in indices if j not in K]
            for lsize in range(len(rest) + 1):
                for extra in itertools.combinations(rest, lsize):
                    yield K, tuple(sorted(K + extra))


def _repolish(system: SingularSystem, witness: SingularWitness, window,
              box_slack: float) -> SingularWitness | None:
    z0 = np.concatenate([witness.x, witness.lam, witness.kappa, [witness.alpha]])
    Z, resids = _levenberg_marquardt(system, z0[None, :], max_iter=30)
    return _classify(system, Z[0], float(resids[0]), window, box_slack)


def scan_singular(prob: ProblemInstance, window, starts: int, seed: int) -> ScanReport:
    """Enumerate all activity patterns, solve each witness system by
    multi-start, and cluster the surviving alpha values.

    The window is treated as open: levels at its edges are not reported.
    Each cluster's best witness is re-polished before being reported; clusters
    whose witnesses all sit on a borderline side condition land in
    `uncertain` instead of the main list."""
    m = len(prob.inequalities)
    if m > PATTERN_GUARD:
        raise ValueError(
            f"problem has {m} inequalities; pattern enumeration is limited to "
            f"{PATTERN_GUARD} to keep 3^m subsets tractable"
        )
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError("window must be a nondegenerate interval")
    span = float(np.max(np.diff(prob.box_array(), axis=1)))
    box_slack = 1e-6 * span

    accepted: list[SingularWitness] = []
    borderline: list[SingularWitness] = []
    systems: dict[tuple, SingularSystem] = {}
    root = np.random.SeedSequence(seed)
    for sys_index, (K, L) in enumerate(_enumerate_patterns(prob)):
        system = build_singular_system(prob, K, L)
        systems[(K, L)] = system
        sols = solve_system_multistart(
            system, (lo, hi), starts, np.random.SeedSequence((seed, sys_index))
        )
        for w in sols:
            (accepted if w.side_conditions_ok else borderline).append(w)

    def cluster(witnesses: list[SingularWitness]) -> list[SingularWitness]:
        witnesses = sorted(witnesses, key=lambda w: (w.alpha, w.K, w.L))
        reps: list[SingularWitness] = []
        group: list[SingularWitness] = []
        for w in witnesses:
            if group and w.alpha - group[-1].alpha > DEDUP_TOL:
                reps.append(min(group, key=lambda g: g.residual_norm))
                group = []
            group.append(w)
        if group:
            reps.append(min(group, key=lambda g: g.residual_norm))
        return reps

    final: list[SingularWitness] = []
    for rep in cluster(accepted):
        polished = _repolish(systems[(rep.K, rep.L)], rep, (lo, hi), box_slack)
        if polished is not None and polished.side_conditions_ok:
            final.append(polished)
        else:
            final.append(rep)
    # borderline clusters that duplicate an accepted level are dropped
    uncertain = [
        w
        for w in cluster(borderline)
        if all(abs(w.alpha - f.alpha) > DEDUP_TOL for f in final)
    ]
    final.sort(key=lambda w: w.alpha)

    bound = milnor_thom_bound(
        prob.num_vars, m, max(1, prob.max_degree()), len(prob.equalities)
    )
    return ScanReport(
        problem=prob.name or "problem",
        window=(lo, hi),
        singular_values=final,
        uncertain=uncertain,
        bound=bound,
        starts_used=starts,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# closed-form oracles for the catalog families
# ---------------------------------------------------------------------------


def _require_distinct(values: list[float], what: str, tol: float = 1e-9) -> list[float]:
    values = sorted(values)
    for a, b in zip(values, values[1:]):
        if b - a <= tol:
            raise ValueError(
                f"{what} produces coincident singular levels ({a} ~ {b}); "
                "choose a generic center a"
            )
    return values


def analytic_singulars_ball_box(n: int, a) -> list[float]:
    """Exact singular levels for the ball-with-box family.

    The shrinking ball of squared radius 4n - alpha is tangent to exactly one
    face of the unit cube per (face subset, sign choice), giving
    alpha = 4n - sum_{i in F} (v_i - a_i)^2 over the 3^n - 1 nonempty faces.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (n,) or np.any(np.abs(a) >= 1):
        raise ValueError("center a must lie in the open unit cube")
    values = []
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        if all(p == 0 for p in pattern):
            continue
        dist_sq = sum((v - ai) ** 2 for v, ai in zip(pattern, a) if v != 0)
        values.append(4.0 * n - dist_sq)
    return _require_distinct(values, "ball_box oracle")


def analytic_singulars_grid(n: int, d: int, a) -> list[float]:
    """Exact singular levels for the grid-of-boxes family.

    Tangency happens only at the outward corners (2*k_i*v_i) of the interval
    grid, one level per (sign vector v, scale vector k):
    alpha = 4*n*d^2 - ||2kv - a||^2, for d^n corners in total.
    """
    if d < 2 or d % 2:
        raise ValueError("d must be an even integer >= 2")
    a = np.asarray(a, dtype=float)
    if a.shape != (n,) or np.any(np.abs(a) >= d):
        raise ValueError("center a must lie in (-d, d)^n")
    values = []
    for v in itertools.product((-1, 1), repeat=n):
        for k in itertools.product(range(1, d // 2 + 1), repeat=n):
            corner = np.array([2 * ki * vi for ki, vi in zip(k, v)], dtype=float)
            values.append(4.0 * n * d * d - float(np.sum((corner - a) ** 2)))
    return _require_distinct(values, "grid_boxes oracle")
