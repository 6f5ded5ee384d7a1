"""Sparse multivariate polynomials: arithmetic, evaluation, differentiation,
and real-root isolation for the univariate case."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Monomial", "Polynomial", "univariate_real_roots"]


@dataclass(frozen=True)
class Monomial:
    """One term coef * prod(x_i ** exps[i])."""

    coef: float
    exps: tuple[int, ...]


class Polynomial:
    """Immutable sparse polynomial in ``num_vars`` real variables.

    Terms are kept merged (no duplicate exponent vectors), zero coefficients
    dropped, and stored in descending graded-lexicographic order so that
    serialization and floating-point accumulation are reproducible.
    The zero polynomial has no terms and degree 0 by convention.
    """

    __slots__ = ("num_vars", "_coefs", "_exps")

    def __init__(self, num_vars: int, terms=()):
        if num_vars < 0:
            raise ValueError("num_vars must be nonnegative")
        merged: dict[tuple[int, ...], float] = {}
        for coef, exps in terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != num_vars:
                raise ValueError(
                    f"exponent vector {exps} has length {len(exps)}, expected {num_vars}"
                )
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            merged[exps] = merged.get(exps, 0.0) + float(coef)
        # descending graded-lex: total degree first, then lexicographic
        order = sorted(merged, key=lambda e: (sum(e), e), reverse=True)
        order = [e for e in order if merged[e] != 0.0]
        self._coefs = np.array([merged[e] for e in order], dtype=float)
        self._exps = (
            np.array(order, dtype=np.int64)
            if order
            else np.zeros((0, num_vars), dtype=np.int64)
        )
        self.num_vars = num_vars

    # construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, num_vars: int) -> "Polynomial":
        return cls(num_vars, ())

    @classmethod
    def constant(cls, num_vars: int, value: float) -> "Polynomial":
        return cls(num_vars, [(value, (0,) * num_vars)])

    @classmethod
    def variable(cls, num_vars: int, index: int) -> "Polynomial":
        if not 0 <= index < num_vars:
            raise ValueError("variable index out of range")
        exps = [0] * num_vars
        exps[index] = 1
        return cls(num_vars, [(1.0, exps)])

    @property
    def terms(self) -> list[Monomial]:
        return [
            Monomial(float(c), tuple(int(x) for x in e))
            for c, e in zip(self._coefs, self._exps)
        ]

    @property
    def is_zero(self) -> bool:
        return len(self._coefs) == 0

    @property
    def degree(self) -> int:
        if self.is_zero:
            return 0
        return int(self._exps.sum(axis=1).max())

    # arithmetic -----------------------------------------------------------

    def _as_terms(self):
        return zip(self._coefs, map(tuple, self._exps))

    def __add__(self, other):
        other = self._coerce(other)
        return Polynomial(self.num_vars, list(self._as_terms()) + list(other._as_terms()))

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return Polynomial(self.num_vars, [(-c, e) for c, e in self._as_terms()])

    def __sub__(self, other):
        return self.__add__(self._coerce(other).__neg__())

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        if np.isscalar(other):
            return Polynomial(self.num_vars, [(c * other, e) for c, e in self._as_terms()])
        other = self._coerce(other)
        terms = []
        for c1, e1 in self._as_terms():
            for c2, e2 in other._as_terms():
                terms.append((c1 * c2, tuple(a + b for a, b in zip(e1, e2))))
        return Polynomial(self.num_vars, terms)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.num_vars, 1.0)
        for _ in range(n):
            out = out * self
        return out

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.num_vars != self.num_vars:
                raise ValueError("num_vars mismatch")
            return other
        if np.isscalar(other):
            return Polynomial.constant(self.num_vars, float(other))
        raise TypeError(f"cannot combine Polynomial with {type(other)!r}")

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return (
            self.num_vars == other.num_vars
            and self._exps.shape == other._exps.shape
            and np.array_equal(self._exps, other._exps)
            and np.array_equal(self._coefs, other._coefs)
        )

    def __hash__(self):
        return hash((self.num_vars, self._exps.tobytes(), self._coefs.tobytes()))

    def __repr__(self):
        if self.is_zero:
            return "Polynomial(0)"
        parts = []
        for c, e in self._as_terms():
            mono = "*".join(f"x{i}^{p}" for i, p in enumerate(e) if p) or "1"
            parts.append(f"{c:g}*{mono}")
        return "Polynomial(" + " + ".join(parts) + ")"

    # evaluation and differentiation ----------------------------------------

    def evaluate(self, x) -> float:
        """Evaluate at a point, accumulating terms in the canonical order."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_vars,):
            raise ValueError(
                f"point has shape {x.shape}, expected ({self.num_vars},)"
            )
        if self.is_zero:
            return 0.0
        return float(np.prod(x[None, :] ** self._exps, axis=1) @ self._coefs)

    def evaluate_many(self, X) -> np.ndarray:
        """Evaluate at many points at once; X has shape (npoints, num_vars)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.num_vars:
            raise ValueError(f"expected shape (n, {self.num_vars}), got {X.shape}")
        if self.is_zero:
            return np.zeros(X.shape[0])
        return np.prod(X[:, None, :] ** self._exps[None, :, :], axis=2) @ self._coefs

    def evaluate_abs(self, x) -> float:
        """Evaluate with absolute coefficients and |x|; bounds roundoff scale."""
        x = np.abs(np.asarray(x, dtype=float))
        if self.is_zero:
            return 0.0
        return float(np.prod(x[None, :] ** self._exps, axis=1) @ np.abs(self._coefs))

    def derivative(self, var: int) -> "Polynomial":
        if not 0 <= var < self.num_vars:
            raise ValueError("variable index out of range")
        terms = []
        for c, e in self._as_terms():
            if e[var] > 0:
                new = list(e)
                new[var] -= 1
                terms.append((c * e[var], tuple(new)))
        return Polynomial(self.num_vars, terms)

    def gradient(self) -> list["Polynomial"]:
        return [self.derivative(k) for k in range(self.num_vars)]

    def hessian(self) -> list[list["Polynomial"]]:
        grad = self.gradient()
        return [[g.derivative(k) for k in range(self.num_vars)] for g in grad]

    # serialization ----------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "terms": [
                {"coef": float(c), "exps": [int(x) for x in e]}
                for c, e in self._as_terms()
            ]
        }

    @classmethod
    def from_json_dict(cls, num_vars: int, data: dict) -> "Polynomial":
        return cls(num_vars, [(t["coef"], t["exps"]) for t in data["terms"]])


def gradient(p: Polynomial) -> list[Polynomial]:
    """Gradient as a vector of polynomials (module-level convenience)."""
    return p.gradient()


def _coeffs_ascending(p: Polynomial) -> np.ndarray:
    out = np.zeros(p.degree + 1)
    for c, e in zip(p._coefs, p._exps):
        out[int(e[0])] += c
    return out


def univariate_real_roots(
    p: Polynomial, lo: float, hi: float, residual_tol: float = 1e-12
) -> list[float]:
    """All real roots of a univariate polynomial in [lo, hi], sorted and
    multiplicity-collapsed.

    Isolation splits [lo, hi] at the (recursively computed) critical points,
    so the polynomial is monotone on each piece; sign changes are then
    bisected and Newton-polished.  Roots at critical points (even
    multiplicity) are caught by a conditioning-aware zero test.
    """
    if p.num_vars != 1:
        raise ValueError("univariate_real_roots requires a 1-variable polynomial")
    if p.is_zero:
        raise ValueError("identically zero polynomial has no isolated roots")
    if hi < lo:
        raise ValueError("empty interval")
    if p.degree == 0:
        return []

    dp = p.derivative(0)

    def is_root(t: float) -> bool:
        scale = p.evaluate_abs(np.array([t])) + 1.0
        return abs(p.evaluate(np.array([t]))) <= 1e-11 * scale

    def polish(t: float, a: float, b: float) -> float:
        for _ in range(30):
            ft = p.evaluate(np.array([t]))
            dt = dp.evaluate(np.array([t]))
            if dt == 0.0:
                break
            step = ft / dt
            t_new = t - step
            if not (a - 1e-9 <= t_new <= b + 1e-9):
                break
            if t_new == t:
                break
            t = t_new
            if abs(ft) <= residual_tol:
                break
        return t

    if p.degree == 1:
        c = _coeffs_ascending(p)
        t = -c[0] / c[1]
        return [t] if lo - 1e-12 <= t <= hi + 1e-12 else []

    crits = univariate_real_roots(dp, lo, hi, residual_tol)
    breakpoints = sorted({lo, hi, *crits})

    roots: list[float] = []
    for t in breakpoints:
        if is_root(t):
            roots.append(polish(t, lo, hi))
    for a, b in zip(breakpoints, breakpoints[1:]):
        fa = p.evaluate(np.array([a]))
        fb = p.evaluate(np.array([b]))
        if fa == 0.0 or fb == 0.0 or np.sign(fa) == np.sign(fb):
            continue
        x0, x1 = a, b
        for _ in range(120):
            mid = 0.5 * (x0 + x1)
            fm = p.evaluate(np.array([mid]))
            if fm == 0.0:
                x0 = x1 = mid
                break
            if np.sign(fm) == np.sign(fa):
                x0, fa = mid, fm
            else:
                x1 = mid
            if x1 - x0 <= 1e-15 * max(1.0, abs(x0), abs(x1)):
                break
        roots.append(polish(0.5 * (x0 + x1), a, b))

    roots.sort()
    collapsed: list[float] = []
    for t in roots:
        if not collapsed or abs(t - collapsed[-1]) > 1e-8 * max(1.0, abs(t)):
            collapsed.append(t)
    return [t for t in collapsed if lo - 1e-9 <= t <= hi + 1e-9]
