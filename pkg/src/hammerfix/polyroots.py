"""Characteristic polynomial and certified counting of its positive roots.

Every float is a dyadic rational, so a polynomial with float coefficients is an
exact polynomial over Q. Scaling by the common power of two turns it into an
integer polynomial, and all sign decisions below (Sturm chains, bisection
signs, bracket scans) are made in exact integer arithmetic on that polynomial.
Counts are therefore exact for the polynomial as stored; the only error left is
the quadrature error already baked into the coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import RootIsolationError
from .quad import CoefficientSet

DEFAULT_ROOT_TOL = 1e-10
MULTIPLICITY_TOL = 1e-9


# --- exact integer polynomial helpers (descending coefficient lists) -------

def _to_integer_poly(coeffs):
    fracs = [Fraction(c) for c in coeffs]
    den = 1
    for f in fracs:
        den = den * f.denominator // math.gcd(den, f.denominator)
    return [int(f * den) for f in fracs]


def _strip(p):
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return p[i:]


def _content(p):
    g = 0
    for c in p:
        g = math.gcd(g, c)
    return g or 1


def _derivative(p):
    n = len(p) - 1
    return [c * (n - j) for j, c in enumerate(p[:-1])] or [0]


def _pseudo_rem(a, b):
    """Remainder of |lc(b)|^(deg a - deg b + 1) * a by b, over the integers."""
    a = list(a)
    lc = b[0]
    scale = abs(lc)
    sgn = 1 if lc > 0 else -1
    db = len(b) - 1
    while len(a) - 1 >= db and any(a):
        q = a[0]
        # a <- |lc| * a - sgn * q * x^(deg a - db) * b
        a = [scale * c for c in a]
        for j, c in enumerate(b):
            a[j] -= sgn * q * c
        a = a[1:]
        a = _strip(a) if a else [0]
        if len(a) - 1 < db:
            break
    # Multiplying by a positive constant never changes Sturm signs, so the
    # missing powers of |lc| from the early exit are harmless.
    return a


def _sign_at(p, x):
    """Exact sign of integer polynomial p at the float x."""
    if math.isinf(x):
        lead = p[0]
        if x > 0 or (len(p) - 1) % 2 == 0:
            return (lead > 0) - (lead < 0)
        return -((lead > 0) - (lead < 0))
    num, den = Fraction(x).as_integer_ratio()
    # den^n * p(num/den) by Horner
    n = len(p) - 1
    dpow = 1
    acc = p[0]
    for j in range(1, n + 1):
        dpow *= den
        acc = acc * num + p[j] * dpow
    return (acc > 0) - (acc < 0)


def _sturm_chain(p):
    chain = [p, _derivative(p)]
    if len(chain[1]) == 1 and chain[1][0] == 0:
        return [p]
    while True:
        r = _pseudo_rem(chain[-2], chain[-1])
        if not any(r):
            break
        r = [-c for c in r]
        g = _content(r)
        chain.append([c // g for c in r])
        if len(r) == 1:
            break
    return chain


def _variations(chain, x):
    signs = [s for s in (_sign_at(q, x) for q in chain) if s != 0]
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


# --- public types ----------------------------------------------------------

@dataclass(frozen=True)
class PolySpec:
    """Polynomial with coefficients in descending degree order."""

    coeffs: tuple
    k: int = None
    zero_tol: float = 0.0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs or not all(math.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite and non-empty")
        object.__setattr__(self, "coeffs", coeffs)
        if self.k is None:
            object.__setattr__(self, "k", len(coeffs) - 2)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def scale(self):
        return max(abs(c) for c in self.coeffs)

    @cached_property
    def exact(self):
        return _to_integer_poly(self.coeffs)

    @cached_property
    def chain(self):
        p = _strip(self.exact)
        if not any(p):
            raise ValueError("zero polynomial")
        return _sturm_chain(p)

    def __call__(self, x):
        """Float evaluation (Horner). Works on arrays."""
        acc = np.zeros_like(np.asarray(x, dtype=float)) + self.coeffs[0]
        for c in self.coeffs[1:]:
            acc = acc * x + c
        return acc if np.ndim(acc) else float(acc)

    def derivative(self, x, order=1):
        c = np.array(self.coeffs)
        for _ in range(order):
            c = np.polyder(c)
        return float(np.polyval(c, x)) if len(c) else 0.0

    def sign(self, x):
        return _sign_at(_strip(self.exact), x)

    def to_dict(self):
        return {"coeffs": list(self.coeffs), "k": self.k, "zero_tol": self.zero_tol}


@dataclass(frozen=True)
class PositiveRoot:
    value: float
    lo: float
    hi: float
    poly_residual: float
    sign_confirmed: bool
    certified_by: str = "sign-change"
    multiplicity: int = 1

    @property
    def enclosure(self):
        return (self.lo, self.hi)

    def to_dict(self):
        return {
            "value": self.value,
            "enclosure": [self.lo, self.hi],
            "poly_residual": self.poly_residual,
            "sign_confirmed": self.sign_confirmed,
            "certified_by": self.certified_by,
            "multiplicity": self.multiplicity,
        }


@dataclass
class SturmCount:
    count: int
    lo: float
    hi: float
    nudges: list = field(default_factory=list)


# --- operations ------------------------------------------------------------

def build_polynomial(c: CoefficientSet) -> PolySpec:
    """P(xi) = a_k xi^(k+1) + sum_{i=0}^{k-1} (a_{k-1-i} - b_{k-i}) xi^(k-i) - b_0."""
    k = c.k
    coeffs = [c.a[k]]
    coeffs += [c.a[k - 1 - i] - c.b[k - i] for i in range(k)]
    coeffs.append(-c.b[0])
    return PolySpec(tuple(coeffs), k, zero_tol=c.zero_tol)


def descartes_positive_bound(p: PolySpec, zero_tol: float = None) -> int:
    """Sign changes in the coefficient sequence, ignoring (near-)zero entries."""
    tol = p.zero_tol if zero_tol is None else zero_tol
    signs = [1 if c > 0 else -1 for c in p.coeffs if abs(c) > tol and c != 0]
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def sturm_count_detail(p: PolySpec, lo: float, hi: float) -> SturmCount:
    if not lo < hi:
        raise ValueError("sturm_count requires lo < hi")
    nudges = []
    # The half-open interval (lo, hi] excludes lo and includes hi, so a root
    # at either end is handled by moving that end up by one ulp.
    if not math.isinf(lo) and p.sign(lo) == 0:
        new = math.nextafter(lo, math.inf)
        nudges.append(("lo", lo, new))
        lo = new
    if not math.isinf(hi) and p.sign(hi) == 0:
        new = math.nextafter(hi, math.inf)
        nudges.append(("hi", hi, new))
        hi = new
    chain = p.chain
    count = _variations(chain, lo) - _variations(chain, hi)
    if count < 0:
        raise RootIsolationError(f"negative Sturm count on ({lo}, {hi}]")
    return SturmCount(count, lo, hi, nudges)


def sturm_count(p: PolySpec, lo: float, hi: float) -> int:
    """Number of distinct real roots of p in (lo, hi]."""
    return sturm_count_detail(p, lo, hi).count


def root_upper_bound(p: PolySpec) -> float:
    """Cauchy bound 1 + max |c_i / c_0|: every real root lies in (-B, B)."""
    c0 = p.coeffs[0]
    if c0 == 0:
        raise ValueError("leading coefficient must be nonzero")
    rest = p.coeffs[1:]
    if not rest:
        return 1.0
    return 1.0 + max(abs(c / c0) for c in rest)


def _multiplicity(p, x):
    tol = MULTIPLICITY_TOL * p.scale * max(1.0, abs(x)) ** p.degree
    m = 1
    while m < p.degree and abs(p.derivative(x, m)) / math.factorial(m) <= tol:
        m += 1
    return m


def _refine_sign_change(p, lo, hi, s_lo, tol):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s = p.sign(mid)
        if s == 0:
            return mid, mid
        if s == s_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _refine_sturm(p, lo, hi, tol):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if p.sign(mid) == 0:
            return mid, mid
        if sturm_count(p, lo, mid) == 1:
            hi = mid
        else:
            lo = mid
    return lo, hi


def _polish(p, value, lo, hi):
    """One guarded Newton step; rejected if it leaves [lo, hi] or worsens |P|."""
    dp = p.derivative(value)
    if dp == 0 or lo == hi:
        return value
    cand = value - p(value) / dp
    if lo <= cand <= hi and abs(p(cand)) <= abs(p(value)):
        return cand
    return value


def isolate_and_refine(p: PolySpec, tol: float = DEFAULT_ROOT_TOL) -> list:
    """All distinct roots of p in (0, B], each enclosed to width <= tol.

    Isolation bisects (lo, hi] with Sturm counts until each interval holds one
    root. Refinement bisects on exact signs when the endpoints straddle a
    sign change, and on Sturm counts otherwise (even multiplicity).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    # one ulp out so rounding in the bound can never cut off a root
    bound = math.nextafter(root_upper_bound(p), math.inf)
    total = sturm_count(p, 0.0, bound)
    isolated = []
    stack = [(0.0, bound, total)]
    while stack:
        lo, hi, n = stack.pop()
        if n == 0:
            continue
        if n == 1:
            isolated.append((lo, hi))
            continue
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            raise RootIsolationError(f"{n} roots inside an unsplittable interval ({lo}, {hi}]")
        left = sturm_count(p, lo, mid)
        stack.append((mid, hi, n - left))
        stack.append((lo, mid, left))

    roots = []
    for lo, hi in sorted(isolated):
        s_hi = p.sign(hi)
        if s_hi == 0:
            roots.append(PositiveRoot(hi, hi, hi, 0.0, True, "exact", _multiplicity(p, hi)))
            continue
        s_lo = p.sign(lo)
        if s_lo == 0:
            # lo is an excluded root of a neighbouring interval; move inside
            lo = math.nextafter(lo, math.inf)
            s_lo = p.sign(lo)
        if s_lo * s_hi < 0:
            lo, hi = _refine_sign_change(p, lo, hi, s_lo, tol)
            how = "sign-change"
        else:
            lo, hi = _refine_sturm(p, lo, hi, tol)
            how = "sturm"
        value = _polish(p, 0.5 * (lo + hi), lo, hi)
        if how == "sign-change":
            confirmed = lo == hi or p.sign(lo) * p.sign(hi) < 0
        else:
            confirmed = lo == hi or sturm_count(p, lo, hi) == 1
        roots.append(
            PositiveRoot(value, lo, hi, abs(p(value)), confirmed, how, _multiplicity(p, value))
        )
    if len(roots) != total:
        raise RootIsolationError(f"isolated {len(roots)} roots but Sturm count is {total}")
    return roots
