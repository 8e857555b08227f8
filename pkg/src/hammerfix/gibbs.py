"""Translation-invariant Gibbs measures of the log(a + b s s') model on a Cayley tree.

The model's Hammerstein kernel is a + b t u, i.e. phi1 = 1, psi1 = a,
phi2 = t, psi2 = b t, which gives the closed forms

    a_i = a C(k, i) / (i + 1),    b_i = b C(k, i) / (i + 2),
    d_i = C(k, i) (a / (k - i + 1) - b / (i + 2)) = C(k, i) h(i),

with h(x) = a / (k - x + 1) - b / (x + 2) increasing on [1, k]. The number of
translation-invariant Gibbs measures equals the number of positive fixed
points of H_k, and this module checks that it is always one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContradictionError
from .quad import CoefficientSet, KernelSpec, binomial, compute_coefficients
from .solver import FixedPointFn, SolveOptions, solve

CLOSED_FORM_AGREEMENT = 1e-10


@dataclass(frozen=True)
class GibbsModel:
    a: float
    b: float
    k: int
    beta: float = 1.0

    def __post_init__(self):
        if not self.a > 0 or not self.b > 0:
            raise ValueError("the model needs a > 0 and b > 0")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("tree order k must be a positive integer")

    def kernel(self) -> KernelSpec:
        # beta is absorbed into a and b; it never enters the kernel
        return KernelSpec.from_text("1", "t", repr(float(self.a)), f"{float(self.b)!r}*t", int(self.k))


@dataclass
class GibbsReport:
    model: GibbsModel
    coefficients: CoefficientSet
    d: list
    d_monotone_nondecreasing: bool
    d_sign_pattern: bool
    h_derivative_min: float
    h_monotone: bool
    n_tigm: int = None
    fixed_point: FixedPointFn = None
    classification: str = None
    quadrature_gap: float = None
    note: str = None

    def to_dict(self):
        return {
            "model": {"a": self.model.a, "b": self.model.b, "k": self.model.k, "beta": self.model.beta},
            "coefficients": {"a": list(self.coefficients.a), "b": list(self.coefficients.b)},
            "d": list(self.d),
            "d_monotone_nondecreasing": self.d_monotone_nondecreasing,
            "d_sign_pattern": self.d_sign_pattern,
            "h_derivative_min": self.h_derivative_min,
            "h_monotone": self.h_monotone,
            "n_tigm": self.n_tigm,
            "classification": self.classification,
            "quadrature_gap": self.quadrature_gap,
            "fixed_point": self.fixed_point.to_dict() if self.fixed_point else None,
            "note": self.note,
        }


def gibbs_coefficients(m: GibbsModel) -> CoefficientSet:
    k = int(m.k)
    a = [m.a * binomial(k, i) / (i + 1) for i in range(k + 1)]
    b = [m.b * binomial(k, i) / (i + 2) for i in range(k + 1)]
    return CoefficientSet(tuple(a), tuple(b), k)


def gibbs_d(m: GibbsModel) -> list:
    k = int(m.k)
    return [binomial(k, i) * (m.a / (k - i + 1) - m.b / (i + 2)) for i in range(1, k + 1)]


def h_function(m: GibbsModel, x):
    return m.a / (m.k - x + 1) - m.b / (x + 2)


def h_function_check(m: GibbsModel, samples: int = 1001):
    """(min of h' over a uniform grid on [1, k], whether h(1..k) is nondecreasing)."""
    if samples < 2:
        raise ValueError("samples must be at least 2")
    x = np.linspace(1.0, float(m.k), samples)
    h_prime = m.a / (m.k - x + 1) ** 2 + m.b / (x + 2) ** 2
    hs = [h_function(m, i) for i in range(1, int(m.k) + 1)]
    monotone = all(hs[i] <= hs[i + 1] for i in range(len(hs) - 1))
    return float(np.min(h_prime)), monotone


def _sign_pattern(d):
    seen_positive = False
    for v in d:
        if v > 0:
            seen_positive = True
        elif v < 0 and seen_positive:
            return False
    return True


def analyze(m: GibbsModel, opts: SolveOptions = None) -> GibbsReport:
    """Closed-form diagnostics plus a full solve of the induced kernel.

    Raises ContradictionError if the solver finds anything other than exactly
    one positive fixed point, or if quadrature disagrees with the closed forms.
    """
    coeffs = gibbs_coefficients(m)
    d = gibbs_d(m)
    h_min, h_mono = h_function_check(m)
    report = GibbsReport(
        model=m,
        coefficients=coeffs,
        d=d,
        d_monotone_nondecreasing=all(d[i] <= d[i + 1] for i in range(len(d) - 1)),
        d_sign_pattern=_sign_pattern(d),
        h_derivative_min=h_min,
        h_monotone=h_mono,
    )
    if m.k < 2:
        report.note = "fixed-point count not computed: the reduction to Q_k requires k >= 2"
        return report

    kernel = m.kernel()
    opts = opts or SolveOptions()
    quad_coeffs = compute_coefficients(kernel, opts.quad_tol)
    gap = max(
        max(abs(x - y) for x, y in zip(quad_coeffs.a, coeffs.a)),
        max(abs(x - y) for x, y in zip(quad_coeffs.b, coeffs.b)),
    )
    report.quadrature_gap = gap
    if gap > CLOSED_FORM_AGREEMENT:
        raise ContradictionError(f"quadrature and closed-form coefficients differ by {gap:.3g}")

    result = solve(kernel, opts, coefficients=quad_coeffs)
    report.classification = result.classification.verdict
    if result.n_fix != 1:
        raise ContradictionError(
            f"found {result.n_fix} positive fixed points for a={m.a}, b={m.b}, k={m.k}; "
            "uniqueness of the translation-invariant Gibbs measure is violated"
        )
    report.n_tigm = result.n_fix
    report.fixed_point = result.fixed_points[0]
    return report
