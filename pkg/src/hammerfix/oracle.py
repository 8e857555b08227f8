"""Independent cross-checks for the solver.

Two probes that do not go through the characteristic polynomial:

* a damped-Newton scan for positive fixed points of the plane map Q_k, and
* Picard iteration of the discretised integral operator on a uniform grid.

Plain Picard iteration f <- H_k f is radially unstable at a positive fixed
point (H_k(c f) = c^k H_k f, so the radial multiplier is k > 1); iterates
collapse to zero or blow up. :func:`normalized_picard` iterates on the
direction instead and rescales the limiting eigenfunction, which does settle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import evaluate
from .polyroots import build_polynomial, root_upper_bound
from .quad import CoefficientSet, KernelSpec
from .solver import PlanePoint, SolveReport, q_components, root_to_point

NEWTON_TOL = 1e-11
DEDUP_RADIUS = 1e-7
MIN_COORD = 1e-9
OVERFLOW = 1e150
CELL_ORDER = 8


@dataclass
class GridFunction:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("a grid function needs at least 2 values")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    @property
    def n(self):
        return self.values.size

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, self.n)

    @classmethod
    def sample(cls, f, n):
        return cls(f(np.linspace(0.0, 1.0, n)))

    def sup_distance(self, other):
        return float(np.max(np.abs(self.values - other.values)))


@dataclass
class ScanResult:
    points: list
    n_starts: int = 0
    n_converged: int = 0
    n_trivial: int = 0
    n_failed: int = 0


@dataclass
class PicardResult:
    limit: GridFunction = None
    iterations: int = 0
    status: str = "not-converged"
    seed_level: float = None
    distance: float = None


@dataclass
class OracleReport:
    q_fixed_points: list
    picard_limits: list
    match: bool
    ratio_errors: list = field(default_factory=list)
    scan: ScanResult = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "match": self.match,
            "q_fixed_points": [[p.x, p.y] for p in self.q_fixed_points],
            "ratio_errors": self.ratio_errors,
            "newton": {
                "starts": self.scan.n_starts,
                "converged": self.scan.n_converged,
                "trivial": self.scan.n_trivial,
                "failed": self.scan.n_failed,
            } if self.scan else None,
            "picard": [
                {
                    "seed_level": r.seed_level,
                    "status": r.status,
                    "iterations": r.iterations,
                    "distance_to_nearest": r.distance,
                }
                for r in self.picard_limits
            ],
            "notes": self.notes,
        }


# --- the plane map ---------------------------------------------------------

def q_map(p: PlanePoint, c: CoefficientSet) -> PlanePoint:
    x, y = p
    with np.errstate(over="ignore", invalid="ignore"):
        return PlanePoint(q_components(x, y, c.a), q_components(x, y, c.b))


def _q_batch(P, coeffs):
    x, y = P[:, 0], P[:, 1]
    acc = np.full(len(P), coeffs[0])
    ypow = np.ones(len(P))
    for coef in coeffs[1:]:
        ypow = ypow * y
        acc = acc * x + coef * ypow
    return acc


def _residual_batch(P, c):
    with np.errstate(all="ignore"):
        return np.stack([_q_batch(P, c.a) - P[:, 0], _q_batch(P, c.b) - P[:, 1]], axis=1)


def _jacobian_batch(P, c):
    """Jacobian of Q_k(p) - p at every row of P, shape (m, 2, 2)."""
    k = c.k
    x, y = P[:, 0], P[:, 1]
    jac = np.zeros((len(P), 2, 2))
    with np.errstate(all="ignore"):
        for row, coeffs in enumerate((c.a, c.b)):
            for i, coef in enumerate(coeffs):
                if k - i > 0:
                    jac[:, row, 0] += coef * (k - i) * x ** (k - i - 1) * y ** i
                if i > 0:
                    jac[:, row, 1] += coef * i * x ** (k - i) * y ** (i - 1)
    jac[:, 0, 0] -= 1.0
    jac[:, 1, 1] -= 1.0
    return jac


def _solve_2x2(J, rhs):
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    out = np.empty_like(rhs)
    with np.errstate(all="ignore"):
        out[:, 0] = (J[:, 1, 1] * rhs[:, 0] - J[:, 0, 1] * rhs[:, 1]) / det
        out[:, 1] = (J[:, 0, 0] * rhs[:, 1] - J[:, 1, 0] * rhs[:, 0]) / det
    bad = ~np.all(np.isfinite(out), axis=1)
    for j in np.flatnonzero(bad):
        if np.all(np.isfinite(J[j])) and np.all(np.isfinite(rhs[j])):
            out[j] = np.linalg.lstsq(J[j], rhs[j], rcond=None)[0]
    return out


def _newton_batch(starts, c, max_iter=200):
    """Damped Newton on Q_k(p) - p for every start at once.

    Returns final points and sup-norm residuals (inf for diverged starts).
    A start stops when backtracking finds no decrease (rounding floor) or
    the step stalls.
    """
    P = np.array(starts, dtype=float).reshape(-1, 2)
    F = _residual_batch(P, c)
    norm = np.max(np.abs(F), axis=1)
    active = np.isfinite(norm) & (norm > 0)
    diverged = ~np.isfinite(norm)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        step = _solve_2x2(_jacobian_batch(P[idx], c), -F[idx])
        lam = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        newP = P[idx].copy()
        newF = F[idx].copy()
        newN = norm[idx].copy()
        for _ in range(34):
            todo = ~accepted
            if not todo.any():
                break
            with np.errstate(all="ignore"):
                trial = P[idx][todo] + lam[todo, None] * step[todo]
            Ft = _residual_batch(trial, c)
            nt = np.max(np.abs(Ft), axis=1)
            ok = np.isfinite(nt) & (nt < norm[idx][todo])
            sel = np.flatnonzero(todo)[ok]
            newP[sel], newF[sel], newN[sel] = trial[ok], Ft[ok], nt[ok]
            accepted[sel] = True
            lam[np.flatnonzero(todo)[~ok]] *= 0.5
        moved = np.max(np.abs(newP - P[idx]), axis=1)
        P[idx], F[idx], norm[idx] = newP, newF, newN
        scale = np.maximum(1.0, np.max(np.abs(newP), axis=1))
        stop = ~accepted | (moved <= 1e-15 * scale) | (newN == 0)
        blown = np.max(np.abs(newP), axis=1) > OVERFLOW
        diverged[idx[blown]] = True
        active[idx[stop | blown]] = False
    norm = np.where(diverged, np.inf, norm)
    return P, norm


def newton_scan_q(c: CoefficientSet, region, starts_per_axis: int = 20, extra_starts=()) -> ScanResult:
    """Damped Newton on Q_k(p) - p from a grid of starts in ``region``.

    ``region`` is (x_lo, x_hi, y_lo, y_hi) inside the open positive quadrant.
    Converged nontrivial points are deduplicated at DEDUP_RADIUS and sorted by x.
    Iteration continues past the acceptance threshold down to the rounding
    floor so that starts converging to one tangential fixed point coalesce.
    """
    x_lo, x_hi, y_lo, y_hi = region
    if not (0 < x_lo < x_hi and 0 < y_lo < y_hi):
        raise ValueError("region must be a nondegenerate rectangle in the open positive quadrant")
    if starts_per_axis < 2:
        raise ValueError("starts_per_axis must be at least 2")
    xs = np.linspace(x_lo, x_hi, starts_per_axis)
    ys = np.linspace(y_lo, y_hi, starts_per_axis)
    starts = [(x, y) for x in xs for y in ys] + [tuple(s) for s in extra_starts]
    result = ScanResult([], n_starts=len(starts))
    found = []
    points, norms = _newton_batch(starts, c)
    for p, norm in zip(points, norms):
        if not norm <= NEWTON_TOL:
            result.n_failed += 1
            continue
        if p[0] <= MIN_COORD or p[1] <= MIN_COORD:
            result.n_trivial += 1
            continue
        result.n_converged += 1
        found.append((norm, p))
    # keep the best-converged representative of each cluster
    found.sort(key=lambda item: item[0])
    kept = []
    for _, p in found:
        if all(np.max(np.abs(p - q)) > DEDUP_RADIUS for q in kept):
            kept.append(p)
    kept.sort(key=lambda q: q[0])
    result.points = [PlanePoint(float(q[0]), float(q[1])) for q in kept]
    return result


def default_region(c: CoefficientSet):
    """Box that contains every positive fixed point, with margin.

    Any fixed point is root_to_point(xi) for a root xi in (0, B]; there
    x = S(xi)^(-1/(k-1)) <= a0^(-1/(k-1)) and y = xi x <= B a0^(-1/(k-1)).
    """
    bound = root_upper_bound(build_polynomial(c))
    xmax = c.a[0] ** (-1.0 / (c.k - 1))
    return (1e-6, 2 * xmax, 1e-6, 2 * bound * xmax)


# --- discretised operator --------------------------------------------------

def _cell_rule():
    x, w = np.polynomial.legendre.leggauss(CELL_ORDER)
    return 0.5 * (x + 1.0), 0.5 * w


def _interp_matrix(n):
    """Rows give cubic-Lagrange weights of the grid values at every quadrature node.

    Each cell [t_j, t_j+1] uses the four nearest grid nodes (shifted inward at
    the ends); with n < 4 the interpolant drops to the available degree.
    """
    h = 1.0 / (n - 1)
    xq, wq = _cell_rule()
    deg = min(3, n - 1)
    rows = []
    weights = []
    nodes = []
    for j in range(n - 1):
        first = min(max(j - 1, 0), n - 1 - deg)
        stencil = np.arange(first, first + deg + 1)
        ts = stencil * h
        for xi, wi in zip(xq, wq):
            u = (j + xi) * h
            lag = np.ones(deg + 1)
            for a in range(deg + 1):
                for b in range(deg + 1):
                    if a != b:
                        lag[a] *= (u - ts[b]) / (ts[a] - ts[b])
            row = np.zeros(n)
            row[stencil] = lag
            rows.append(row)
            weights.append(wi * h)
            nodes.append(u)
    return np.array(rows), np.array(weights), np.array(nodes)


_INTERP_CACHE = {}


def _interp(n):
    if n not in _INTERP_CACHE:
        _INTERP_CACHE[n] = _interp_matrix(n)
    return _INTERP_CACHE[n]


def operator_grid_coefficients(f: GridFunction, kernel: KernelSpec):
    matrix, weights, nodes = _interp(f.n)
    fu = matrix @ f.values
    fk = fu ** kernel.k
    c1 = float(np.sum(weights * evaluate(kernel.psi1, nodes) * fk))
    c2 = float(np.sum(weights * evaluate(kernel.psi2, nodes) * fk))
    return c1, c2


def apply_operator_grid(f: GridFunction, kernel: KernelSpec) -> GridFunction:
    """(H_k f) at the grid nodes, from a piecewise-cubic interpolant of f."""
    if np.any(f.values < 0):
        raise ValueError("apply_operator_grid needs a nonnegative function")
    c1, c2 = operator_grid_coefficients(f, kernel)
    t = f.nodes
    return GridFunction(c1 * evaluate(kernel.phi1, t) + c2 * evaluate(kernel.phi2, t))


def picard_detail(kernel: KernelSpec, seed: GridFunction, max_iter: int = 500, tol: float = 1e-10,
                  overflow: float = 1e12) -> PicardResult:
    if np.any(seed.values < 0) or not np.any(seed.values > 0):
        raise ValueError("Picard seed must be nonnegative and not identically zero")
    f = seed
    for it in range(1, max_iter + 1):
        # f^k must stay well inside the float range
        if kernel.k * math.log10(np.max(f.values)) > 250:
            return PicardResult(None, it, "diverged")
        g = apply_operator_grid(f, kernel)
        if np.max(g.values) > overflow:
            return PicardResult(None, it, "diverged")
        dist = g.sup_distance(f)
        f = g
        if np.max(f.values) < tol:
            return PicardResult(None, it, "collapsed-to-trivial")
        if dist <= tol:
            return PicardResult(f, it, "converged")
    return PicardResult(None, max_iter, "not-converged")


def picard(kernel: KernelSpec, seed: GridFunction, max_iter: int = 500, tol: float = 1e-10):
    """Iterate f <- H_k f; the limit, or None on divergence, collapse or stalling."""
    return picard_detail(kernel, seed, max_iter, tol).limit


def normalized_picard(kernel: KernelSpec, seed: GridFunction, max_iter: int = 2000,
                      tol: float = 1e-12) -> PicardResult:
    """Iterate g <- H_k g / max(H_k g), then rescale the limit to a fixed point.

    At the limit H_k g = lam g, and H_k(s g) = s^k lam g = s g for
    s = lam^(-1/(k-1)).
    """
    if np.any(seed.values < 0) or not np.any(seed.values > 0):
        raise ValueError("seed must be nonnegative and not identically zero")
    g = GridFunction(seed.values / np.max(seed.values))
    for it in range(1, max_iter + 1):
        h = apply_operator_grid(g, kernel)
        lam = float(np.max(h.values))
        if not lam > 0:
            return PicardResult(None, it, "collapsed-to-trivial")
        h = GridFunction(h.values / lam)
        dist = h.sup_distance(g)
        g = h
        if dist <= tol:
            s = lam ** (-1.0 / (kernel.k - 1))
            return PicardResult(GridFunction(s * g.values), it, "converged")
    return PicardResult(None, max_iter, "not-converged")


# --- aggregate -------------------------------------------------------------

def cross_check(report: SolveReport, starts_per_axis: int = 20, picard_seeds: int = 3,
                grid: int = 401, seed_near_roots: bool = True) -> OracleReport:
    """Compare the solver's fixed points against the Newton scan and Picard probes."""
    c = report.coefficients
    kernel = report.kernel
    extra = []
    if seed_near_roots:
        for root in report.roots:
            p = root_to_point(root.value, c)
            extra.append((p.x * 1.01, p.y * 0.99))
    scan = newton_scan_q(c, default_region(c), starts_per_axis, extra)
    notes = []
    match = len(scan.points) == report.n_fix
    if not match:
        notes.append(f"Newton scan found {len(scan.points)} fixed points, solver reported {report.n_fix}")
    roots = [r.value for r in report.roots]
    ratio_errors = []
    for p in scan.points:
        ratio = p.y / p.x
        err = min((abs(ratio - r) for r in roots), default=math.inf)
        ratio_errors.append(err)
        if err > 1e-6:
            match = False
            notes.append(f"Q_k fixed point {p} has ratio {ratio!r} matching no polynomial root")

    t = np.linspace(0.0, 1.0, grid)
    targets = [fp.values(kernel, t) for fp in report.fixed_points]
    limits = []
    levels = np.geomspace(0.1, 10.0, picard_seeds) if picard_seeds > 1 else np.array([0.5])
    for level in levels:
        seed = GridFunction(np.full(grid, float(level)))
        for probe in (picard_detail, normalized_picard):
            res = probe(kernel, seed)
            res.seed_level = float(level)
            res.status = f"{probe.__name__.replace('_detail', '')}:{res.status}"
            if res.limit is not None:
                res.distance = min(float(np.max(np.abs(res.limit.values - tv))) for tv in targets)
            limits.append(res)
    return OracleReport(scan.points, limits, match, ratio_errors, scan, notes)
