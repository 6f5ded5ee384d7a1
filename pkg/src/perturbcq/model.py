"""Problem instances, perturbation semantics, active sets, and the catalog
of built-in example problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .poly import Polynomial, univariate_real_roots

__all__ = [
    "PerturbationSpec",
    "ProblemInstance",
    "ActiveSet",
    "FeasibleSet1D",
    "feasibility_residual",
    "active_set",
    "catalog",
    "univariate_feasible_intervals",
    "CATALOG_FAMILIES",
]

DEFAULT_ACTIVE_TOL = 1e-7


@dataclass(frozen=True)
class PerturbationSpec:
    """Either a diagonal level (applied to the perturbable indices only) or a
    full bound vector.  Vector mode is evaluate-only: the scanner and the
    homotopy driver work on the diagonal."""

    kind: str  # "diagonal" | "vector"
    alpha: float = 0.0
    mu: tuple[float, ...] = ()

    @classmethod
    def diagonal(cls, alpha: float) -> "PerturbationSpec":
        return cls(kind="diagonal", alpha=float(alpha))

    @classmethod
    def vector(cls, mu) -> "PerturbationSpec":
        return cls(kind="vector", mu=tuple(float(v) for v in mu))

    def bounds(self, prob: "ProblemInstance") -> np.ndarray:
        """Right-hand-side bound for each inequality g_i <= bound_i."""
        m = len(prob.inequalities)
        if self.kind == "diagonal":
            b = np.zeros(m)
            b[list(prob.perturbable)] = self.alpha
            return b
        if self.kind == "vector":
            if len(self.mu) != m:
                raise ValueError(f"mu has length {len(self.mu)}, expected {m}")
            return np.array(self.mu, dtype=float)
        raise ValueError(f"unknown perturbation kind {self.kind!r}")


@dataclass(frozen=True)
class ActiveSet:
    """Inequality indices active at a queried point, with the tolerance used."""

    indices: tuple[int, ...]
    tolerance: float


@dataclass(frozen=True)
class FeasibleSet1D:
    """Union of closed intervals plus isolated points on the real line."""

    intervals: tuple[tuple[float, float], ...]
    points: tuple[float, ...]

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return any(a - tol <= x <= b + tol for a, b in self.intervals) or any(
            abs(x - p) <= tol for p in self.points
        )


@dataclass(frozen=True)
class ProblemInstance:
    """A polynomial constraint system g_i <= 0 (baseline), h_j = 0, with an
    optional objective and a perturbable/fixed index partition."""

    num_vars: int
    inequalities: tuple[Polynomial, ...]
    equalities: tuple[Polynomial, ...] = ()
    objective: Polynomial | None = None
    perturbable: tuple[int, ...] = None  # default: all inequality indices
    sample_box: tuple[tuple[float, float], ...] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        m = len(self.inequalities)
        for p in (*self.inequalities, *self.equalities):
            if p.num_vars != self.num_vars:
                raise ValueError("all constraint polynomials must share num_vars")
        if self.objective is not None and self.objective.num_vars != self.num_vars:
            raise ValueError("objective num_vars mismatch")
        if self.perturbable is None:
            object.__setattr__(self, "perturbable", tuple(range(m)))
        else:
            pert = tuple(sorted(set(int(i) for i in self.perturbable)))
            if pert and (pert[0] < 0 or pert[-1] >= m):
                raise ValueError(f"perturbable indices {pert} out of range [0, {m})")
            object.__setattr__(self, "perturbable", pert)
        if self.sample_box is None:
            object.__setattr__(
                self, "sample_box", tuple((-1.0, 1.0) for _ in range(self.num_vars))
            )
        else:
            box = tuple((float(a), float(b)) for a, b in self.sample_box)
            if len(box) != self.num_vars:
                raise ValueError("sample_box must have one interval per variable")
            if any(a > b for a, b in box):
                raise ValueError("sample_box intervals must satisfy lo <= hi")
            object.__setattr__(self, "sample_box", box)

    @property
    def fixed(self) -> tuple[int, ...]:
        """Complement of the perturbable index set."""
        pert = set(self.perturbable)
        return tuple(i for i in range(len(self.inequalities)) if i not in pert)

    def box_array(self) -> np.ndarray:
        return np.array(self.sample_box, dtype=float)

    def max_degree(self) -> int:
        degs = [p.degree for p in (*self.inequalities, *self.equalities)]
        return max(degs) if degs else 0

    def to_document(self) -> dict:
        """JSON-serializable problem document (1-based perturbable indices)."""
        doc = {
            "name": self.name,
            "num_vars": self.num_vars,
            "inequalities": [p.to_json_dict() for p in self.inequalities],
            "equalities": [p.to_json_dict() for p in self.equalities],
            "perturbable": [i + 1 for i in self.perturbable],
            "sample_box": [[a, b] for a, b in self.sample_box],
        }
        if self.objective is not None:
            doc["objective"] = self.objective.to_json_dict()
        return doc


def feasibility_residual(
    prob: ProblemInstance, pert: PerturbationSpec, x
) -> tuple[float, float]:
    """(max inequality violation clamped at 0, max |equality residual|)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (prob.num_vars,):
        raise ValueError(f"point has shape {x.shape}, expected ({prob.num_vars},)")
    b = pert.bounds(prob)
    ineq = 0.0
    for g, bi in zip(prob.inequalities, b):
        ineq = max(ineq, g.evaluate(x) - bi)
    eq = 0.0
    for h in prob.equalities:
        eq = max(eq, abs(h.evaluate(x)))
    return ineq, eq


def active_set(
    prob: ProblemInstance,
    pert: PerturbationSpec,
    x,
    tau_act: float = DEFAULT_ACTIVE_TOL,
) -> ActiveSet:
    """Indices i with bound_i - g_i(x) <= tau_act; x must be feasible to tau_act."""
    x = np.asarray(x, dtype=float)
    ineq, eq = feasibility_residual(prob, pert, x)
    if max(ineq, eq) > tau_act:
        raise ValueError(
            f"point is infeasible (violation {max(ineq, eq):.3e} > tau_act {tau_act:.1e})"
        )
    b = pert.bounds(prob)
    idx = tuple(
        i
        for i, (g, bi) in enumerate(zip(prob.inequalities, b))
        if bi - g.evaluate(x) <= tau_act
    )
    return ActiveSet(indices=idx, tolerance=tau_act)


# ---------------------------------------------------------------------------
# catalog of example problems
# ---------------------------------------------------------------------------


def _cusp() -> ProblemInstance:
    # x1^3 + x2 <= 0 and x1^3 - x2 <= 0: boundary has a cusp at the origin
    x1c = Polynomial(2, [(1.0, (3, 0))])
    x2 = Polynomial.variable(2, 1)
    return ProblemInstance(
        num_vars=2,
        inequalities=(x1c + x2, x1c - x2),
        sample_box=((-2.0, 1.0), (-2.0, 1.0)),
        name="cusp",
    )


def _cusp_boxed() -> ProblemInstance:
    base = _cusp()
    x1 = Polynomial.variable(2, 0)
    return ProblemInstance(
        num_vars=2,
        inequalities=(*base.inequalities, -x1 - 2.0),
        sample_box=base.sample_box,
        name="cusp_boxed",
    )


def _tangent_discs() -> ProblemInstance:
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    g1 = x1 * x1 + x2 * x2 - 1.0
    g2 = (x1 - 2.0) * (x1 - 2.0) + x2 * x2 - 1.0
    return ProblemInstance(
        num_vars=2,
        inequalities=(g1, g2),
        sample_box=((-1.5, 3.5), (-1.5, 1.5)),
        name="tangent_discs",
    )


def _ball_box(n: int, a) -> ProblemInstance:
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"a must have length {n}")
    if np.any(np.abs(a) >= 1.0):
        raise ValueError("a must lie in the open cube (-1, 1)^n")
    # g0 = 4n - sum (x_i - a_i)^2 : complement of the ball B(a, sqrt(4n - alpha))
    g0 = Polynomial.constant(n, 4.0 * n)
    box = []
    for i in range(n):
        xi = Polynomial.variable(n, i)
        g0 = g0 - (xi - float(a[i])) * (xi - float(a[i]))
        box.append(xi * xi - 1.0)
    return ProblemInstance(
        num_vars=n,
        inequalities=(g0, *box),
        perturbable=(0,),
        sample_box=tuple((-1.5, 1.5) for _ in range(n)),
        name="ball_box",
    )


def _q_poly(n: int, var: int, d: int) -> Polynomial:
    """prod_{k=1..d} (x_var^2 - k^2) embedded in n variables."""
    xi = Polynomial.variable(n, var)
    out = Polynomial.constant(n, 1.0)
    for k in range(1, d + 1):
        out = out * (xi * xi - float(k * k))
    return out


def _grid_boxes(n: int, d: int, a) -> ProblemInstance:
    if d < 2 or d % 2 != 0:
        raise ValueError("grid_boxes requires an even degree parameter d >= 2")
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"a must have length {n}")
    if np.any(np.abs(a) >= d):
        raise ValueError(f"a must lie in the open cube (-{d}, {d})^n")
    g0 = Polynomial.constant(n, 4.0 * n * d * d)
    for i in range(n):
        xi = Polynomial.variable(n, i)
        g0 = g0 - (xi - float(a[i])) * (xi - float(a[i]))
    grids = tuple(_q_poly(n, i, d) for i in range(n))
    return ProblemInstance(
        num_vars=n,
        inequalities=(g0, *grids),
        perturbable=(0,),
        sample_box=tuple((-(d + 1.0), d + 1.0) for _ in range(n)),
        name="grid_boxes",
    )


def _interval_pair() -> ProblemInstance:
    x = Polynomial.variable(1, 0)
    g1 = 1.0 - x * x
    g2 = (x + 1.0) * (x + 1.0) - 4.0
    return ProblemInstance(
        num_vars=1,
        inequalities=(g1, g2),
        sample_box=((-5.0, 5.0),),
        name="interval_pair",
    )


CATALOG_FAMILIES = (
    "cusp",
    "cusp_boxed",
    "tangent_discs",
    "ball_box",
    "grid_boxes",
    "interval_pair",
)


def catalog(name: str, **params) -> ProblemInstance:
    """Built-in problem families.

    cusp, cusp_boxed, tangent_discs, interval_pair take no parameters;
    ball_box needs n and a (a in (-1,1)^n); grid_boxes needs n, even d >= 2,
    and a in (-d, d)^n.
    """
    if name == "cusp":
        return _cusp()
    if name == "cusp_boxed":
        return _cusp_boxed()
    if name == "tangent_discs":
        return _tangent_discs()
    if name == "interval_pair":
        return _interval_pair()
    if name == "ball_box":
        return _ball_box(int(params["n"]), params["a"])
    if name == "grid_boxes":
        return _grid_boxes(int(params["n"]), int(params["d"]), params["a"])
    raise ValueError(f"unknown catalog family {name!r}; known: {CATALOG_FAMILIES}")


# ---------------------------------------------------------------------------
# exact 1-D feasible sets
# ---------------------------------------------------------------------------


def univariate_feasible_intervals(
    prob: ProblemInstance,
    pert: PerturbationSpec,
    window: tuple[float, float],
    boundary_tol: float = 1e-9,
) -> FeasibleSet1D:
    """Exact feasible set of a 1-variable inequality system on a window,
    as a union of closed intervals and isolated points.

    Breakpoints are the roots of each g_i - bound_i; open segments between
    breakpoints are classified by a midpoint sign test, and feasible
    breakpoints not adjacent to a feasible segment are isolated points.
    """
    if prob.num_vars != 1:
        raise ValueError("univariate_feasible_intervals requires a 1-variable problem")
    if prob.equalities:
        raise ValueError("equality constraints are not supported here")
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError("degenerate window")

    b = pert.bounds(prob)
    breakpoints = {lo, hi}
    for g, bi in zip(prob.inequalities, b):
        shifted = g - float(bi)
        if shifted.is_zero:
            continue
        if shifted.degree == 0:
            continue  # constant sign, classified by midpoint tests
        breakpoints.update(univariate_real_roots(shifted, lo, hi))
    pts = sorted(breakpoints)

    def violation(t: float) -> float:
        return max(g.evaluate(np.array([t])) - bi for g, bi in zip(prob.inequalities, b))

    seg_ok = [
        violation(0.5 * (a + c)) <= 0.0 for a, c in zip(pts, pts[1:])
    ]

    intervals: list[tuple[float, float]] = []
    i = 0
    while i < len(seg_ok):
        if seg_ok[i]:
            j = i
            while j + 1 < len(seg_ok) and seg_ok[j + 1]:
                j += 1
            intervals.append((pts[i], pts[j + 1]))
            i = j + 1
        i += 1

    isolated = []
    for k, t in enumerate(pts):
        left_ok = k > 0 and seg_ok[k - 1]
        right_ok = k < len(seg_ok) and seg_ok[k]
        if not left_ok and not right_ok and violation(t) <= boundary_tol:
            isolated.append(t)

    return FeasibleSet1D(intervals=tuple(intervals), points=tuple(isolated))
