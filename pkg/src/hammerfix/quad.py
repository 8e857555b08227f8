"""Adaptive quadrature on [0, 1] and the coefficient vectors of a rank-2 kernel.

For K(t, u) = phi1(t) psi1(u) + phi2(t) psi2(u) and power k the operator
reduces to two coefficient families

    a[i] = C(k, i) * int_0^1 psi1 phi1^(k-i) phi2^i du
    b[i] = C(k, i) * int_0^1 psi2 phi1^(k-i) phi2^i du,   i = 0..k

and their differences d[i] = a[i-1] - b[i], i = 1..k.
"""

from __future__ import annotations

import heapq
import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConeViolationError, DegenerateCoefficientError, QuadratureError
from .expr import DEFAULT_CONE_GRID, Expression, check_cone, evaluate, parse_expr

DEFAULT_QUAD_TOL = 1e-10
DEFAULT_MAX_K = 64
PANEL_ORDER = 16
MAX_SUBDIVISIONS = 4000


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _panel(f, lo, hi):
    x, w = _gauss_legendre(PANEL_ORDER)
    half = 0.5 * (hi - lo)
    u = lo + half * (x + 1.0)
    vals = np.asarray(f(u), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError(f"integrand is not finite on [{lo}, {hi}]")
    return half * (vals @ w)


def integrate(f: Callable, tol: float = DEFAULT_QUAD_TOL, lo: float = 0.0, hi: float = 1.0,
              max_subdivisions: int = MAX_SUBDIVISIONS):
    """Globally adaptive Gauss-Legendre quadrature of ``f`` over [lo, hi].

    ``f`` receives a 1-d array of nodes and returns either values of the same
    shape or an array of shape ``(m, n)`` for m integrands sharing the nodes;
    in the latter case an array of m integrals is returned and ``tol`` bounds
    every component. Each panel's error is estimated as the difference between
    the panel rule and the rule applied on its two halves; the panel with the
    largest estimate is split until the summed estimate drops below the target.
    Targets are floored at a few ulps of the integral's magnitude, since an
    absolute ``tol`` is meaningless for integrals of order 1e8 and above.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    def refine(a, b):
        mid = 0.5 * (a + b)
        left = _panel(f, a, mid)
        right = _panel(f, mid, b)
        return left, right

    whole = _panel(f, lo, hi)
    left, right = refine(lo, hi)
    fine = left + right
    err = np.abs(fine - whole)
    # heap entries: (-max_err, seq, a, b, estimate, err)
    heap = [(-float(np.max(err)), 0, lo, hi, fine, err)]
    total = fine.copy() if np.ndim(fine) else float(fine)
    total_err = err.copy() if np.ndim(err) else float(err)
    seq = 1
    splits = 0
    while True:
        target = np.maximum(tol, 8 * np.finfo(float).eps * np.abs(total))
        if np.all(total_err <= target):
            break
        if splits >= max_subdivisions:
            raise QuadratureError(
                f"no convergence after {max_subdivisions} subdivisions "
                f"(error estimate {np.max(total_err):.3g}, tol {tol:.3g})"
            )
        _, _, a, b, est, e = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        total = total - est
        total_err = total_err - e
        for c, d in ((a, mid), (mid, b)):
            piece = _panel(f, c, d)
            l2, r2 = refine(c, d)
            sub = l2 + r2
            sub_err = np.abs(sub - piece)
            total = total + sub
            total_err = total_err + sub_err
            heapq.heappush(heap, (-float(np.max(sub_err)), seq, c, d, sub, sub_err))
            seq += 1
        splits += 1
        # Summation drift can leave tiny negatives.
        total_err = np.maximum(total_err, 0.0)
    # Re-sum in a fixed order so the result does not depend on heap history.
    pieces = sorted(heap, key=lambda item: item[2])
    result = sum((item[4] for item in pieces[1:]), pieces[0][4])
    if np.ndim(result):
        return np.asarray(result, dtype=float)
    return float(result)


def binomial(k: int, i: int) -> int:
    """Exact C(k, i), refusing values that would not survive conversion to float."""
    if not (0 <= i <= k):
        raise ValueError(f"binomial({k}, {i}) requires 0 <= i <= k")
    value = math.comb(k, i)
    if value > sys.float_info.max:
        raise OverflowError(f"C({k}, {i}) exceeds the floating-point range")
    return value


@dataclass(frozen=True)
class KernelSpec:
    """Rank-2 kernel phi1(t) psi1(u) + phi2(t) psi2(u) with power k."""

    phi1: Expression
    phi2: Expression
    psi1: Expression
    psi2: Expression
    k: int

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 2:
            raise ValueError(f"k must be an integer >= 2, got {self.k!r}")

    @classmethod
    def from_text(cls, phi1, phi2, psi1, psi2, k):
        return cls(parse_expr(phi1), parse_expr(phi2), parse_expr(psi1), parse_expr(psi2), int(k))

    def factors(self):
        return {"phi1": self.phi1, "phi2": self.phi2, "psi1": self.psi1, "psi2": self.psi2}

    def validate(self, grid_size=DEFAULT_CONE_GRID, max_k=DEFAULT_MAX_K):
        if self.k > max_k:
            raise ValueError(f"k={self.k} exceeds the configured maximum {max_k}")
        for name, e in self.factors().items():
            report = check_cone(e, grid_size)
            if report.verdict == "non-member":
                if report.nontrivial:
                    why = f"takes the negative value {report.min_value:.6g} at t={report.argmin:.6g}"
                else:
                    why = "vanishes identically or is nonpositive"
                raise ConeViolationError(f"{name} = '{e.source}' is not in C0+[0,1]: {why}")
        return self

    def summary(self):
        return {name: e.source for name, e in self.factors().items()} | {"k": self.k}


@dataclass(frozen=True)
class CoefficientSet:
    a: tuple
    b: tuple
    k: int
    quadrature_tol: float = DEFAULT_QUAD_TOL
    d: tuple = field(init=False)

    def __post_init__(self):
        if len(self.a) != self.k + 1 or len(self.b) != self.k + 1:
            raise ValueError("a and b must both have k+1 entries")
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        # d[0] here is d_1 in the usual 1-based numbering.
        object.__setattr__(self, "d", tuple(self.a[i - 1] - self.b[i] for i in range(1, self.k + 1)))

    @property
    def zero_tol(self):
        """Magnitude below which a d value is indistinguishable from quadrature noise."""
        return 10 * self.quadrature_tol

    def check_positive(self, eps=None):
        eps = self.zero_tol if eps is None else eps
        for name, vec in (("a", self.a), ("b", self.b)):
            for i, v in enumerate(vec):
                if not v > eps:
                    raise DegenerateCoefficientError(
                        f"degenerate coefficient {name}[{i}] = {v:.6g} (must exceed {eps:.3g})"
                    )
        return self


def compute_coefficients(kernel: KernelSpec, tol: float = DEFAULT_QUAD_TOL) -> CoefficientSet:
    k = kernel.k
    binoms = np.array([float(binomial(k, i)) for i in range(k + 1)])
    powers = np.arange(k + 1)

    def integrand(u):
        p1 = evaluate(kernel.phi1, u)
        p2 = evaluate(kernel.phi2, u)
        s1 = evaluate(kernel.psi1, u)
        s2 = evaluate(kernel.psi2, u)
        # mono[i] = phi1^(k-i) phi2^i, built by products rather than pow so
        # that zeros of phi1/phi2 cause no 0**0 ambiguity.
        mono = np.empty((k + 1, u.size))
        left = np.ones((k + 1, u.size))
        right = np.ones((k + 1, u.size))
        for i in range(1, k + 1):
            left[i] = left[i - 1] * p1
            right[i] = right[i - 1] * p2
        mono[:] = left[k - powers] * right[powers]
        mono *= binoms[:, None]
        return np.vstack([s1 * mono, s2 * mono])

    values = integrate(integrand, tol)
    coeffs = CoefficientSet(tuple(values[: k + 1]), tuple(values[k + 1:]), k, tol)
    return coeffs.check_positive()
