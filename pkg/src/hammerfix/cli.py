"""Command-line front end.

    hammerfix solve  --kernel FILE [--json] [--cross-check] [--quad-tol X] [--root-tol X] [--grid N] [-o FILE]
    hammerfix gibbs  --a X --b X --k N [--beta X] [--sweep a_lo:a_hi:steps,b_lo:b_hi:steps] [--json]
    hammerfix oracle --kernel FILE [--starts N] [--picard-seeds N] [--json]
    hammerfix verify REPORT.json

Exit status: 0 success, 1 bad input, 2 internal contradiction.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__
from .errors import ContradictionError, HammerfixError, InputError
from .gibbs import GibbsModel, analyze
from .oracle import cross_check
from .polyroots import root_upper_bound
from .quad import KernelSpec, compute_coefficients
from .solver import (
    PlanePoint,
    SolveOptions,
    apply_operator,
    reconstruct,
    solve,
    verify_q,
)

log = logging.getLogger("hammerfix")

KERNEL_KEYS = ("phi1", "phi2", "psi1", "psi2", "k")
OPTION_KEYS = {"quad_tol": float, "root_tol": float, "residual_tol": float, "grid": int}


class UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- kernel files ----------------------------------------------------------

def parse_kernel_text(text, origin="<kernel>"):
    """Parse ``key = value`` lines; ``#`` starts a comment. Returns (KernelSpec, options)."""
    values = {}
    options = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{origin}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in KERNEL_KEYS:
            target = values
        elif key in OPTION_KEYS:
            target = options
        else:
            raise InputError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in target:
            raise InputError(f"{origin}:{lineno}: duplicate key {key!r}")
        if not value:
            raise InputError(f"{origin}:{lineno}: empty value for {key!r}")
        target[key] = value
    missing = [key for key in KERNEL_KEYS if key not in values]
    if missing:
        raise InputError(f"{origin}: missing keys {', '.join(missing)}")
    try:
        k = int(values["k"])
    except ValueError:
        raise InputError(f"{origin}: k must be an integer, got {values['k']!r}") from None
    if k < 2:
        raise InputError(f"{origin}: k must be at least 2, got {k}")
    try:
        options = {key: OPTION_KEYS[key](v) for key, v in options.items()}
    except ValueError as exc:
        raise InputError(f"{origin}: bad option value ({exc})") from None
    kernel = KernelSpec.from_text(values["phi1"], values["phi2"], values["psi1"], values["psi2"], k)
    return kernel, options


def load_kernel(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read kernel file: {exc}") from None
    return parse_kernel_text(text, path)


def _options(args, file_options):
    merged = dict(file_options)
    for key in ("quad_tol", "root_tol", "residual_tol", "grid"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    try:
        return SolveOptions(**merged)
    except ValueError as exc:
        raise InputError(str(exc)) from None


# --- report assembly -------------------------------------------------------

def solve_payload(report, oracle=None):
    c = report.coefficients
    opts = report.options
    return {
        "inputs": {
            "kernel": report.kernel.summary(),
            "options": {
                "quad_tol": opts.quad_tol,
                "root_tol": opts.root_tol,
                "residual_tol": opts.residual_tol,
                "q_tol": opts.q_tol,
                "grid": opts.grid,
            },
        },
        "coefficients": {"a": list(c.a), "b": list(c.b), "d": list(c.d), "quadrature_tol": c.quadrature_tol},
        "polynomial": {
            "coeffs": list(report.polynomial.coeffs),
            "descartes_bound": report.descartes_bound,
            "cauchy_bound": root_upper_bound(report.polynomial),
        },
        "roots": [r.to_dict() for r in report.roots],
        "fixed_points": [fp.to_dict() for fp in report.fixed_points],
        "classification": report.classification.to_dict(),
        "n_fix": report.n_fix,
        "oracle": oracle.to_dict() if oracle is not None else None,
    }


def dump_json(payload):
    # json uses repr for floats: shortest round-trip text, hence deterministic
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(x):
    return f"{x:.10g}"


def solve_text(report, oracle=None):
    c = report.coefficients
    lines = [
        f"kernel: K(t,u) = ({report.kernel.phi1.source})*psi1(u) + ({report.kernel.phi2.source})*psi2(u), "
        f"psi1 = {report.kernel.psi1.source}, psi2 = {report.kernel.psi2.source}, k = {report.kernel.k}",
        "a = " + ", ".join(_fmt(x) for x in c.a),
        "b = " + ", ".join(_fmt(x) for x in c.b),
        "d = " + ", ".join(_fmt(x) for x in c.d),
        "P(xi) coefficients (descending) = " + ", ".join(_fmt(x) for x in report.polynomial.coeffs),
        f"Descartes bound: {report.descartes_bound}",
        f"classification: {report.classification.verdict}",
        f"n_fix = {report.n_fix}",
    ]
    for i, (root, fp) in enumerate(zip(report.roots, report.fixed_points), 1):
        lines.append(
            f"  #{i}: xi0 = {root.value:.12g} (multiplicity {root.multiplicity}), "
            f"x0 = {fp.x0:.12g}, y0 = {fp.y0:.12g}, "
            f"f0(t) = x0*phi1(t) + y0*phi2(t), sup|H f0 - f0| = {fp.residual_sup:.3g}"
        )
    if oracle is not None:
        lines.append(f"oracle: {'agrees' if oracle.match else 'DISAGREES'} "
                     f"({len(oracle.q_fixed_points)} Q_k fixed points)")
        for r in oracle.picard_limits:
            extra = f", distance {r.distance:.3g}" if r.distance is not None else ""
            lines.append(f"  seed {r.seed_level:g}: {r.status} after {r.iterations} iterations{extra}")
        lines.extend(f"  note: {n}" for n in oracle.notes)
    return "\n".join(lines) + "\n"


def _emit(text, output):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- commands --------------------------------------------------------------

def cmd_solve(args):
    kernel, file_options = load_kernel(args.kernel)
    report = solve(kernel, _options(args, file_options))
    oracle = cross_check(report) if args.cross_check else None
    if args.json:
        _emit(dump_json(solve_payload(report, oracle)), args.output)
    else:
        _emit(solve_text(report, oracle), args.output)
    if oracle is not None and not oracle.match:
        raise ContradictionError("oracle cross-check disagrees with the solver: " + "; ".join(oracle.notes))
    return 0


def cmd_oracle(args):
    kernel, file_options = load_kernel(args.kernel)
    report = solve(kernel, _options(args, file_options))
    oracle = cross_check(report, starts_per_axis=args.starts, picard_seeds=args.picard_seeds)
    if args.json:
        _emit(dump_json(solve_payload(report, oracle)), args.output)
    else:
        _emit(solve_text(report, oracle), args.output)
    if not oracle.match:
        raise ContradictionError("oracle cross-check disagrees with the solver: " + "; ".join(oracle.notes))
    return 0


def _parse_sweep(spec):
    try:
        parts = spec.split(",")
        if len(parts) != 2:
            raise ValueError
        axes = []
        for part in parts:
            lo, hi, steps = part.split(":")
            lo, hi, steps = float(lo), float(hi), int(steps)
            if steps < 1 or lo <= 0 or hi <= 0:
                raise ValueError
            axes.append(np.linspace(lo, hi, steps) if steps > 1 else np.array([lo]))
        return axes
    except ValueError:
        raise InputError(f"bad --sweep value {spec!r}; expected a_lo:a_hi:steps,b_lo:b_hi:steps") from None


def _gibbs_text(rep):
    m = rep.model
    lines = [
        f"model a={m.a:g} b={m.b:g} k={m.k} beta={m.beta:g}",
        "  d = " + ", ".join(_fmt(x) for x in rep.d),
        f"  d nondecreasing: {rep.d_monotone_nondecreasing}; d sign pattern (-..-, +..+): {rep.d_sign_pattern}",
        f"  min h'(x) on [1,k] = {rep.h_derivative_min:.6g}; h(1..k) nondecreasing: {rep.h_monotone}",
    ]
    if rep.n_tigm is None:
        lines.append(f"  n_tigm: not computed ({rep.note})")
    else:
        fp = rep.fixed_point
        lines.append(f"  classification: {rep.classification}")
        lines.append(f"  n_tigm = {rep.n_tigm}; fixed point f0(t) = {fp.x0:.10g} + {fp.y0:.10g}*t, "
                     f"residual {fp.residual_sup:.3g}")
    return "\n".join(lines) + "\n"


def cmd_gibbs(args):
    if args.sweep:
        a_values, b_values = _parse_sweep(args.sweep)
    else:
        if args.a is None or args.b is None:
            raise UsageError("gibbs needs --a and --b (or --sweep)")
        a_values, b_values = [args.a], [args.b]
    try:
        models = [GibbsModel(float(a), float(b), args.k, args.beta) for a in a_values for b in b_values]
    except ValueError as exc:
        raise InputError(str(exc)) from None
    reports = [analyze(m) for m in models]
    if args.json:
        payload = [r.to_dict() for r in reports]
        _emit(dump_json(payload[0] if len(payload) == 1 and not args.sweep else payload), args.output)
    else:
        _emit("".join(_gibbs_text(r) for r in reports), args.output)
    return 0


def verify_payload(payload):
    """Recompute residuals of a stored solve report. Returns a list of failures."""
    try:
        spec = payload["inputs"]["kernel"]
        opts = payload["inputs"]["options"]
        kernel = KernelSpec.from_text(spec["phi1"], spec["phi2"], spec["psi1"], spec["psi2"], int(spec["k"]))
        quad_tol = float(opts["quad_tol"])
        residual_tol = float(opts["residual_tol"])
        q_tol = float(opts.get("q_tol", 1e-8))
        fixed_points = payload["fixed_points"]
        n_fix = int(payload["n_fix"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed report: {exc!r}") from None
    failures = []
    if n_fix != len(fixed_points):
        failures.append(f"n_fix={n_fix} but {len(fixed_points)} fixed points listed")
    kernel.validate()
    coeffs = compute_coefficients(kernel, quad_tol)
    for i, fp in enumerate(fixed_points):
        try:
            x0, y0 = float(fp["x0"]), float(fp["y0"])
            samples = np.array(fp["samples"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed fixed point #{i}: {exc!r}") from None
        point = PlanePoint(x0, y0)
        q_res = verify_q(point, coeffs)
        if q_res > q_tol:
            failures.append(f"fixed point #{i}: Q_k residual {q_res:.3g} > {q_tol:.3g}")
        fresh = reconstruct(point, kernel, max(2, len(samples)))
        f_closed = np.array([s[1] for s in fresh.samples])
        if samples.ndim != 2 or samples.shape[1] != 2:
            failures.append(f"fixed point #{i}: samples malformed")
            continue
        drift = float(np.max(np.abs(samples[:, 1] - f_closed)))
        if drift > 1e-12 * max(1.0, float(np.max(np.abs(f_closed)))):
            failures.append(f"fixed point #{i}: stored samples deviate from x0*phi1 + y0*phi2 by {drift:.3g}")
        t = samples[:, 0]
        image = apply_operator(kernel, lambda u: x0 * kernel.phi1(u) + y0 * kernel.phi2(u), t, quad_tol)
        residual = float(np.max(np.abs(image - samples[:, 1])))
        if residual > residual_tol:
            failures.append(f"fixed point #{i}: operator residual {residual:.3g} > {residual_tol:.3g}")
    return failures


def cmd_verify(args):
    try:
        with open(args.report, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report: {exc}") from None
    if not isinstance(payload, dict):
        raise InputError("report must be a JSON object")
    failures = verify_payload(payload)
    if failures:
        raise ContradictionError("verification failed: " + "; ".join(failures))
    sys.stdout.write(f"ok: {len(payload['fixed_points'])} fixed point(s) re-verified\n")
    return 0


def build_parser():
    parser = _Parser(prog="hammerfix", description="Positive fixed points of rank-2 Hammerstein operators.")
    parser.add_argument("--version", action="version", version=f"hammerfix {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def tolerances(p):
        p.add_argument("--quad-tol", dest="quad_tol", type=float)
        p.add_argument("--root-tol", dest="root_tol", type=float)
        p.add_argument("--residual-tol", dest="residual_tol", type=float)
        p.add_argument("--grid", type=int)
        p.add_argument("--json", action="store_true")
        p.add_argument("-o", "--output")

    p = sub.add_parser("solve", help="count and reconstruct positive fixed points")
    p.add_argument("--kernel", required=True)
    p.add_argument("--cross-check", action="store_true")
    tolerances(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gibbs", help="analyse the log(a + b s s') model on a Cayley tree")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sweep")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gibbs)

    p = sub.add_parser("oracle", help="cross-check the solver with independent probes")
    p.add_argument("--kernel", required=True)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--picard-seeds", dest="picard_seeds", type=int, default=3)
    tolerances(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="re-check residuals of a JSON report")
    p.add_argument("report")
    p.set_defaults(func=cmd_verify)
    return parser


def run(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="hammerfix: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.DEBUG)
        return args.func(args)
    except ContradictionError as exc:
        log.error("internal contradiction: %s", exc)
        return 2
    except (HammerfixError, ValueError, OverflowError) as exc:
        log.error("%s", exc)
        return 1


def main():
    sys.exit(run())
