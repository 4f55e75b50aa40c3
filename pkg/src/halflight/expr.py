"""Immersion expression language: parsing, printing and jet evaluation.

Grammar (``^`` binds tighter than unary minus, functions need parentheses)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" exponent)?
    exponent:= "-" exponent | power
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

Names are chart variables ``v1..vm`` and, inside frame overrides, ambient
coordinates ``x1..xn`` (bound to the immersion components).  Exponents must
fold to an integer or a half-integer constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from . import jet as J

__all__ = [
    "Expression",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "ExprSyntaxError",
    "ExprDomainError",
    "UnboundVariableError",
    "FUNCTIONS",
    "parse",
    "pretty",
    "bind",
    "variables",
    "eval_jet",
    "eval_value",
]

FUNCTIONS = ("sqrt", "sin", "cos", "exp", "log")


# -- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "v" (chart) or "x" (ambient coordinate)
    index: int  # 1-based, as written

    @property
    def name(self) -> str:
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: Fraction


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, BinOp, Pow, Call]


# -- errors ----------------------------------------------------------------

class ExprSyntaxError(ValueError):
    """Parse failure with a 1-based line/column and the expected tokens."""

    def __init__(self, message, line, column, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(sorted(set(expected)))
        where = f"line {line}, column {column}"
        exp = f"; expected one of {', '.join(repr(e) for e in self.expected)}" if self.expected else ""
        super().__init__(f"{message} at {where}{exp}")


class ExprDomainError(ValueError):
    """Evaluation left the real smooth domain of a subexpression."""

    def __init__(self, message, subexpression):
        self.subexpression = subexpression
        super().__init__(f"{message} in {pretty(subexpression)!r}")


class UnboundVariableError(ValueError):
    pass


# -- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<bad>.)
    """,
    re.VERBOSE,
)

_NAME_RE = re.compile(r"([vx])([1-9][0-9]*)$")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str):
    toks = []
    line, line_start = 1, 0
    for mt in _TOKEN_RE.finditer(source):
        kind = mt.lastgroup
        col = mt.start() - line_start + 1
        text = mt.group()
        if kind == "ws":
            continue
        if kind == "nl":
            line += 1
            line_start = mt.end()
            continue
        if kind == "bad":
            raise ExprSyntaxError(f"unexpected character {text!r}", line, col)
        if kind == "number":
            # reject things like "1.2.3" that the regex would split silently
            end = mt.end()
            if end < len(source) and (source[end] == "." or source[end].isalpha()):
                raise ExprSyntaxError(f"malformed number {text + source[end]!r}", line, col)
        toks.append(_Tok(kind, text, line, col))
    toks.append(_Tok("end", "", line, len(source) - line_start + 1))
    return toks


# -- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, source):
        self.toks = _tokenize(source)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, expected):
        t = self.tok
        what = "end of input" if t.kind == "end" else f"unexpected token {t.text!r}"
        raise ExprSyntaxError(what, t.line, t.col, expected)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind == "end":
            self.error([text])
        return self.advance()

    def parse(self):
        e = self.expr()
        if self.tok.kind != "end":
            self.error(["+", "-", "*", "/", "^", "end of input"])
        return e

    def expr(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            t = self.advance()
            exp_tree = self.exponent()
            return Pow(base, _fold_exponent(exp_tree, t))
        return base

    def exponent(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.exponent())
        return self.power()

    def atom(self):
        t = self.tok
        if t.kind == "number":
            self.advance()
            try:
                return Num(float(t.text))
            except ValueError:  # pragma: no cover - regex guarantees a float
                raise ExprSyntaxError(f"malformed number {t.text!r}", t.line, t.col)
        if t.kind == "name":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            mt = _NAME_RE.match(t.text)
            if mt is None:
                raise ExprSyntaxError(f"unknown identifier {t.text!r}", t.line, t.col,
                                      ["v<index>", "x<index>", *FUNCTIONS])
            return Var(mt.group(1), int(mt.group(2)))
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self.error(["number", "variable", "(", "-", *FUNCTIONS])


def _const_value(e):
    if isinstance(e, Num):
        return Fraction(e.value)
    if isinstance(e, Neg):
        return -_const_value(e.operand)
    if isinstance(e, BinOp):
        a, b = _const_value(e.left), _const_value(e.right)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            raise ZeroDivisionError
        return a / b
    if isinstance(e, Pow):
        base = _const_value(e.base)
        if e.exponent.denominator != 1:
            raise ValueError("non-integer power inside exponent")
        return base ** int(e.exponent)
    raise ValueError("exponent is not constant")


def _fold_exponent(tree, tok):
    try:
        p = _const_value(tree)
    except (ValueError, ZeroDivisionError):
        raise ExprSyntaxError("exponent must be a constant integer or half-integer",
                              tok.line, tok.col + 1)
    if p.denominator not in (1, 2):
        raise ExprSyntaxError(f"unsupported exponent {p}; only n or n/2 allowed",
                              tok.line, tok.col + 1)
    return p


def parse(source: str) -> Expression:
    """Parse one expression into an immutable AST."""
    return _Parser(source).parse()


# -- printing ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _fmt_exponent(p: Fraction) -> str:
    if p.denominator == 1:
        n = int(p)
        return str(n) if n >= 0 else f"-{-n}"
    return f"({p.numerator}/{p.denominator})"


def pretty(e: Expression) -> str:
    """Canonical text form; ``parse(pretty(e)) == e`` for parsed trees."""
    return _pp(e, 0)


def _pp(e, ctx):
    # ctx: binding strength required by the parent (0 none, 1 additive,
    # 2 multiplicative, 3 unary, 4 power base)
    if isinstance(e, Num):
        s = _fmt_num(e.value)
        return f"({s})" if e.value < 0 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({_pp(e.arg, 0)})"
    if isinstance(e, Neg):
        s = "-" + _pp(e.operand, 3)
        return f"({s})" if ctx > 3 or ctx == 2.5 else s
    if isinstance(e, Pow):
        s = f"{_pp(e.base, 4)}^{_fmt_exponent(e.exponent)}"
        # exponents are right-associative: a power used as a base needs parentheses
        return f"({s})" if ctx >= 4 else s
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = _pp(e.left, p)
        # right operand of a left-associative op needs a tighter context
        right = _pp(e.right, p + 0.5)
        s = f"{left} {e.op} {right}"
        return f"({s})" if ctx > p else s
    raise TypeError(f"not an expression: {e!r}")


# -- analysis ----------------------------------------------------------------

def variables(e: Expression) -> set:
    """All variables referenced by ``e``."""
    out = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            out.add(n)
        elif isinstance(n, (Neg,)):
            stack.append(n.operand)
        elif isinstance(n, BinOp):
            stack.extend((n.left, n.right))
        elif isinstance(n, Pow):
            stack.append(n.base)
        elif isinstance(n, Call):
            stack.append(n.arg)
    return out


def bind(e: Expression, m: int, n_ambient: int | None = None) -> Expression:
    """Check variable indices against the chart (and ambient) dimension."""
    for var in variables(e):
        if var.kind == "v" and not 1 <= var.index <= m:
            raise UnboundVariableError(f"{var.name} exceeds chart dimension {m}")
        if var.kind == "x":
            if n_ambient is None:
                raise UnboundVariableError(f"{var.name} is only allowed in frame overrides")
            if not 1 <= var.index <= n_ambient:
                raise UnboundVariableError(f"{var.name} exceeds ambient dimension {n_ambient}")
    return e


# -- evaluation ----------------------------------------------------------------

def eval_jet(e: Expression, point, order: int = 3, ambient: Sequence[J.Jet3] | None = None) -> J.Jet3:
    """Evaluate ``e`` as a jet of the given order at ``point``.

    ``point`` may be a single chart point ``(m,)`` or a batch ``(P, m)``.
    ``ambient`` supplies jets for ``x1..xn`` when the expression uses them.
    """
    point = np.asarray(point, dtype=float)
    m = point.shape[-1]
    cache = {}

    def var(v):
        if v not in cache:
            if v.kind == "v":
                if v.index > m:
                    raise UnboundVariableError(f"{v.name} exceeds chart dimension {m}")
                cache[v] = J.Jet3.variable(point, v.index - 1, order)
            else:
                if ambient is None or v.index > len(ambient):
                    raise UnboundVariableError(f"{v.name} is not bound")
                cache[v] = ambient[v.index - 1].truncate(order)
        return cache[v]

    def const(x):
        return J.Jet3.constant(np.broadcast_to(x, point.shape[:-1]), m, order)

    def go(n):
        if isinstance(n, Num):
            return const(n.value)
        if isinstance(n, Var):
            return var(n)
        if isinstance(n, Neg):
            return -go(n.operand)
        if isinstance(n, BinOp):
            a, b = go(n.left), go(n.right)
            if n.op == "+":
                return a + b
            if n.op == "-":
                return a - b
            if n.op == "*":
                return a * b
            if np.any(b.v == 0):
                raise ExprDomainError("division by zero", n)
            return a / b
        if isinstance(n, Pow):
            a = go(n.base)
            p = n.exponent
            if p.denominator == 2 and np.any(a.v <= 0):
                raise ExprDomainError("fractional power of a non-positive value", n)
            if p < 0 and np.any(a.v == 0):
                raise ExprDomainError("negative power of zero", n)
            return a ** (int(p) if p.denominator == 1 else p)
        if isinstance(n, Call):
            a = go(n.arg)
            if n.func in ("sqrt", "log") and np.any(a.v <= 0):
                raise ExprDomainError(f"{n.func} of a non-positive value", n)
            return J.elementwise(n.func, a)
        raise TypeError(f"not an expression: {n!r}")

    return go(e)


def eval_value(e: Expression, point, lib=math, ambient=None):
    """Plain (non-jet) evaluation; ``lib`` may be ``math`` or ``mpmath``.

    This evaluator shares no code with the jet path and serves as the
    finite-difference oracle in tests.
    """

    def go(n):
        if isinstance(n, Num):
            return lib.mpf(n.value) if hasattr(lib, "mpf") else n.value
        if isinstance(n, Var):
            if n.kind == "v":
                return point[n.index - 1]
            return ambient[n.index - 1]
        if isinstance(n, Neg):
            return -go(n.operand)
        if isinstance(n, BinOp):
            a, b = go(n.left), go(n.right)
            if n.op == "+":
                return a + b
            if n.op == "-":
                return a - b
            if n.op == "*":
                return a * b
            if b == 0:
                raise ExprDomainError("division by zero", n)
            return a / b
        if isinstance(n, Pow):
            a = go(n.base)
            p = n.exponent
            if p.denominator == 2:
                if a <= 0:
                    raise ExprDomainError("fractional power of a non-positive value", n)
                return lib.sqrt(a) ** p.numerator
            if p < 0 and a == 0:
                raise ExprDomainError("negative power of zero", n)
            return a ** int(p)
        if isinstance(n, Call):
            a = go(n.arg)
            if n.func in ("sqrt", "log") and a <= 0:
                raise ExprDomainError(f"{n.func} of a non-positive value", n)
            return getattr(lib, n.func)(a)
        raise TypeError(f"not an expression: {n!r}")

    return go(e)
