"""Univariate kernel-factor expressions.

A small recursive-descent parser for expressions in the single variable ``t``::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | 't' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := exp | ln | sqrt | sin | cos | abs

Evaluation works on Python floats and on numpy arrays alike, so the quadrature
code can evaluate a factor on a whole panel of nodes at once.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ExprDomainError, ExprSyntaxError

FUNCTIONS = {
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
}

DEFAULT_CONE_GRID = 1001
# A sampled minimum in (-CONE_FUZZ * scale, 0) is reported as indeterminate.
CONE_FUZZ = 1e-12


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    def __str__(self):
        return "t"


@dataclass(frozen=True)
class Neg:
    operand: "Node"

    def __str__(self):
        return f"(-{self.operand})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"

    def __str__(self):
        return f"{self.func}({self.arg})"


Node = Union[Num, Var, Neg, BinOp, Call]


# --- tokenizer / parser ----------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", source, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(message, self.source, tok[2])

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text or tok[0] == "end":
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise self.error(f"expected {text!r}, found {found}")
        return self.advance()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected token {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        kind, text, _ = tok
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "name":
            self.advance()
            if text == "t":
                return Var()
            if text not in FUNCTIONS:
                raise self.error(f"unknown identifier {text!r}", tok)
            self.expect("(")
            arg = self.expr()
            if self.peek()[1] == ",":
                raise self.error(f"function {text!r} takes exactly one argument")
            self.expect(")")
            return Call(text, arg)
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected token {text!r}")


# --- evaluation ------------------------------------------------------------

def _check(value, node):
    if not np.all(np.isfinite(value)):
        raise ExprDomainError("non-finite value", node)
    return value


def _eval(node, t):
    if isinstance(node, Num):
        return node.value + 0.0 * t
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -_eval(node.operand, t)
    if isinstance(node, Call):
        x = _eval(node.arg, t)
        if node.func == "ln" and np.any(x <= 0):
            raise ExprDomainError("logarithm of a non-positive number", node)
        if node.func == "sqrt" and np.any(x < 0):
            raise ExprDomainError("square root of a negative number", node)
        with np.errstate(all="ignore"):
            return _check(FUNCTIONS[node.func](x), node)
    left = _eval(node.left, t)
    right = _eval(node.right, t)
    with np.errstate(all="ignore"):
        if node.op == "+":
            out = left + right
        elif node.op == "-":
            out = left - right
        elif node.op == "*":
            out = left * right
        elif node.op == "/":
            if np.any(right == 0):
                raise ExprDomainError("division by zero", node)
            out = left / right
        else:
            bad = (left < 0) & (right != np.round(right))
            if np.any(bad):
                raise ExprDomainError("non-integer power of a negative number", node)
            out = np.power(left, right)
    return _check(out, node)


@dataclass(frozen=True)
class Expression:
    """A parsed expression in ``t``. Immutable, hence safe to share."""

    ast: Node
    source: str

    def __call__(self, t):
        return evaluate(self, t)

    def __str__(self):
        return str(self.ast)


def parse_expr(source: str) -> Expression:
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", source or "", 0)
    return Expression(_Parser(source).parse(), source)


def evaluate(e: Expression, t):
    """Evaluate ``e`` at ``t`` (a float or an array of floats in [0, 1])."""
    scalar = np.ndim(t) == 0
    tt = np.asarray(t, dtype=float)
    if np.any((tt < 0) | (tt > 1)):
        raise ValueError("t must lie in [0, 1]")
    out = np.asarray(_eval(e.ast, tt), dtype=float)
    if scalar:
        return float(out)
    return out


# The spec-facing name; ``eval`` would shadow the builtin.
eval_expr = evaluate


@dataclass(frozen=True)
class PositivityReport:
    min_value: float
    argmin: float
    nontrivial: bool
    grid_size: int
    max_value: float = 0.0

    @property
    def verdict(self):
        """'member', 'non-member' or 'indeterminate' for C0+[0,1]."""
        if not self.nontrivial:
            return "non-member"
        if self.min_value >= 0:
            return "member"
        scale = max(1.0, abs(self.max_value))
        if self.min_value > -CONE_FUZZ * scale:
            return "indeterminate"
        return "non-member"

    @property
    def member(self):
        return self.verdict == "member"


def check_cone(e: Expression, grid_size: int = DEFAULT_CONE_GRID) -> PositivityReport:
    """Sample ``e`` on a uniform grid and report its minimum and nontriviality."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    t = np.linspace(0.0, 1.0, grid_size)
    values = evaluate(e, t)
    j = int(np.argmin(values))
    return PositivityReport(
        min_value=float(values[j]),
        argmin=float(t[j]),
        nontrivial=bool(np.max(values) > 0),
        grid_size=grid_size,
        max_value=float(np.max(values)),
    )


def constant(value: float) -> Expression:
    """Build an expression for a constant without going through text."""
    if not math.isfinite(value):
        raise ValueError("constant must be finite")
    return parse_expr(repr(float(value)))
