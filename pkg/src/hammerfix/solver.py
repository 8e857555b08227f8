"""End-to-end pipeline: kernel -> coefficients -> polynomial -> roots -> fixed points.

Each positive root xi0 of the characteristic polynomial gives the plane point

    x0 = (sum_i a[i] xi0^i) ** (-1 / (k - 1)),   y0 = xi0 * x0,

which is a fixed point of Q_k(x, y) = (sum a[i] x^(k-i) y^i, sum b[i] x^(k-i) y^i),
and f0(t) = x0 phi1(t) + y0 phi2(t) is then a fixed point of the operator.
Every reconstructed f0 is pushed back through the operator by quadrature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContradictionError, HammerfixError
from .expr import DEFAULT_CONE_GRID, evaluate
from .polyroots import (
    DEFAULT_ROOT_TOL,
    PolySpec,
    PositiveRoot,
    build_polynomial,
    descartes_positive_bound,
    isolate_and_refine,
    root_upper_bound,
)
from .quad import DEFAULT_MAX_K, DEFAULT_QUAD_TOL, CoefficientSet, KernelSpec, compute_coefficients, integrate

log = logging.getLogger(__name__)

UNIQUE_BY_SIGN_PATTERN = "UNIQUE_BY_SIGN_PATTERN"
AT_MOST_3_BY_MONOTONE_DECREASE = "AT_MOST_3_BY_MONOTONE_DECREASE"
BRACKET_IMPLIES_GE_2 = "BRACKET_IMPLIES_GE_2"
GENERAL = "GENERAL"

DEFAULT_GRID = 201
DEFAULT_RESIDUAL_TOL = 1e-6
DEFAULT_Q_TOL = 1e-8
BRACKET_POINTS = 256


@dataclass(frozen=True)
class PlanePoint:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass
class FixedPointFn:
    x0: float
    y0: float
    xi: float
    samples: list
    residual_sup: float = None
    q_residual: float = None

    @property
    def trivial(self):
        return self.x0 == 0 and self.y0 == 0

    def values(self, kernel, t):
        return self.x0 * evaluate(kernel.phi1, t) + self.y0 * evaluate(kernel.phi2, t)

    def to_dict(self):
        return {
            "x0": self.x0,
            "y0": self.y0,
            "xi": self.xi,
            "residual_sup": self.residual_sup,
            "q_residual": self.q_residual,
            "samples": [[t, v] for t, v in self.samples],
        }


@dataclass
class Classification:
    verdict: str
    sign_pattern: bool
    nondecreasing: bool
    nonincreasing: bool
    bracket: tuple = None

    def consistent_with(self, n_fix):
        """Check every fact that holds, not only the reported verdict."""
        if self.sign_pattern or self.nondecreasing:
            if n_fix != 1:
                return False
        if self.nonincreasing and n_fix > 3:
            return False
        if self.bracket is not None and n_fix < 2:
            return False
        return True

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "sign_pattern": self.sign_pattern,
            "d_nondecreasing": self.nondecreasing,
            "d_nonincreasing": self.nonincreasing,
            "bracket": list(self.bracket) if self.bracket else None,
        }


@dataclass
class SolveOptions:
    quad_tol: float = DEFAULT_QUAD_TOL
    root_tol: float = DEFAULT_ROOT_TOL
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    q_tol: float = DEFAULT_Q_TOL
    grid: int = DEFAULT_GRID
    cone_grid: int = DEFAULT_CONE_GRID
    max_k: int = DEFAULT_MAX_K

    def __post_init__(self):
        for name in ("quad_tol", "root_tol", "residual_tol", "q_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid < 2 or self.cone_grid < 2:
            raise ValueError("grid sizes must be at least 2")


@dataclass
class SolveReport:
    kernel: KernelSpec
    coefficients: CoefficientSet
    polynomial: PolySpec
    descartes_bound: int
    roots: list
    fixed_points: list
    classification: Classification
    options: SolveOptions = field(default_factory=SolveOptions)
    oracle: object = None

    @property
    def n_fix(self):
        return len(self.fixed_points)


# --- operations ------------------------------------------------------------

def root_to_point(xi0: float, c: CoefficientSet) -> PlanePoint:
    if not xi0 > 0:
        raise ValueError("xi0 must be positive")
    if c.k < 2:
        raise ValueError("reconstruction needs k >= 2")
    total = 0.0
    for coef in reversed(c.a):
        total = total * xi0 + coef
    x = total ** (-1.0 / (c.k - 1))
    return PlanePoint(x, xi0 * x)


def q_components(x, y, coeffs):
    """sum coeffs[i] x^(k-i) y^i by homogeneous Horner."""
    acc = coeffs[0]
    ypow = 1.0
    for coef in coeffs[1:]:
        ypow = ypow * y
        acc = acc * x + coef * ypow
    return acc


def verify_q(p: PlanePoint, c: CoefficientSet) -> float:
    """max(|Q1(p) - x|, |Q2(p) - y|); zero at an exact fixed point of Q_k."""
    x, y = p
    q1 = q_components(x, y, c.a)
    q2 = q_components(x, y, c.b)
    return max(abs(q1 - x), abs(q2 - y))


def reconstruct(p: PlanePoint, kernel: KernelSpec, grid: int = DEFAULT_GRID) -> FixedPointFn:
    if not (p.x > 0 and p.y > 0):
        raise ValueError("reconstruction needs a point with x > 0 and y > 0")
    if grid < 2:
        raise ValueError("grid must be at least 2")
    t = np.linspace(0.0, 1.0, grid)
    f = p.x * evaluate(kernel.phi1, t) + p.y * evaluate(kernel.phi2, t)
    return FixedPointFn(p.x, p.y, p.y / p.x, list(zip(t.tolist(), f.tolist())))


def operator_coefficients(kernel: KernelSpec, f, tol: float = DEFAULT_QUAD_TOL):
    """(c1, c2) = (int psi1 f^k, int psi2 f^k) for a callable f on [0, 1].

    (H_k f)(t) = c1 phi1(t) + c2 phi2(t).
    """
    k = kernel.k

    def integrand(u):
        fk = np.asarray(f(u), dtype=float) ** k
        return np.vstack([evaluate(kernel.psi1, u) * fk, evaluate(kernel.psi2, u) * fk])

    c1, c2 = integrate(integrand, tol)
    return float(c1), float(c2)


def apply_operator(kernel: KernelSpec, f, t, tol: float = DEFAULT_QUAD_TOL):
    c1, c2 = operator_coefficients(kernel, f, tol)
    return c1 * evaluate(kernel.phi1, t) + c2 * evaluate(kernel.phi2, t)


def verify_operator(f: FixedPointFn, kernel: KernelSpec, tol: float = DEFAULT_QUAD_TOL) -> float:
    """Sup over the sample grid of |H_k f - f|; also stored on ``f``."""
    if f.trivial:
        f.residual_sup = 0.0
        return 0.0
    t = np.array([s[0] for s in f.samples])
    values = np.array([s[1] for s in f.samples])
    image = apply_operator(kernel, lambda u: f.values(kernel, u), t, tol)
    f.residual_sup = float(np.max(np.abs(image - values)))
    return f.residual_sup


def _find_bracket(poly: PolySpec):
    bound = root_upper_bound(poly)
    grid = np.geomspace(bound * 1e-6, bound, BRACKET_POINTS)
    first_pos = None
    for xi in grid:
        s = poly.sign(float(xi))
        if first_pos is None:
            if s > 0:
                first_pos = float(xi)
        elif s <= 0:
            return first_pos, float(xi)
    return None


def classify(c: CoefficientSet, poly: PolySpec = None) -> Classification:
    """Advisory uniqueness/count verdict from the d values and a bracket scan.

    d values within ``c.zero_tol`` of zero count as zero. The sign-pattern test
    accepts a split index i0 in 0..k (an empty nonpositive block is allowed);
    with i0 = 0 the coefficient sequence still has exactly one sign change.
    """
    tol = c.zero_tol
    d = [0.0 if abs(v) <= tol else v for v in c.d]
    nondecreasing = all(d[i] <= d[i + 1] for i in range(len(d) - 1))
    nonincreasing = all(d[i] >= d[i + 1] for i in range(len(d) - 1))
    # no positive d before a negative one
    seen_positive = False
    sign_pattern = True
    for v in d:
        if v > 0:
            seen_positive = True
        elif v < 0 and seen_positive:
            sign_pattern = False
            break
    bracket = _find_bracket(poly if poly is not None else build_polynomial(c))
    if sign_pattern or nondecreasing:
        verdict = UNIQUE_BY_SIGN_PATTERN
    elif bracket is not None:
        verdict = BRACKET_IMPLIES_GE_2
    elif nonincreasing:
        verdict = AT_MOST_3_BY_MONOTONE_DECREASE
    else:
        verdict = GENERAL
    return Classification(verdict, sign_pattern, nondecreasing, nonincreasing, bracket)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except HammerfixError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def solve(kernel: KernelSpec, opts: SolveOptions = None, coefficients: CoefficientSet = None) -> SolveReport:
    """Run the whole pipeline and check the count bounds before returning.

    ``coefficients`` may be supplied to skip quadrature (the kernel is still
    used for reconstruction and operator verification).
    """
    opts = opts or SolveOptions()
    _stage("validate", kernel.validate, opts.cone_grid, opts.max_k)
    if coefficients is None:
        coefficients = _stage("coefficients", compute_coefficients, kernel, opts.quad_tol)
    else:
        _stage("coefficients", coefficients.check_positive)
    poly = build_polynomial(coefficients)
    bound = descartes_positive_bound(poly)
    roots = _stage("roots", isolate_and_refine, poly, opts.root_tol)

    fixed_points = []
    for root in roots:
        point = root_to_point(root.value, coefficients)
        fp = _stage("reconstruct", reconstruct, point, kernel, opts.grid)
        fp.q_residual = verify_q(point, coefficients)
        _stage("verify", verify_operator, fp, kernel, opts.quad_tol)
        fixed_points.append(fp)

    classification = classify(coefficients, poly)
    report = SolveReport(kernel, coefficients, poly, bound, roots, fixed_points, classification, opts)
    _stage("consistency", check_report, report)
    return report


def check_report(report: SolveReport):
    n = report.n_fix
    k = report.kernel.k
    problems = []
    if not 1 <= n <= k + 1:
        problems.append(f"n_fix={n} outside [1, {k + 1}]")
    if n > report.descartes_bound or (report.descartes_bound - n) % 2:
        problems.append(f"n_fix={n} inconsistent with Descartes bound {report.descartes_bound}")
    if not report.classification.consistent_with(n):
        problems.append(f"classification {report.classification.verdict} contradicts n_fix={n}")
    for fp in report.fixed_points:
        if fp.q_residual > report.options.q_tol:
            problems.append(f"Q_k residual {fp.q_residual:.3g} at xi={fp.xi:.17g}")
        if fp.residual_sup > report.options.residual_tol:
            problems.append(f"operator residual {fp.residual_sup:.3g} at xi={fp.xi:.17g}")
    if problems:
        raise ContradictionError("; ".join(problems))
    return report
