"""Coordinate expressions and second-order jets.

Expressions are small infix formulas over chart coordinates and named
parameters, e.g. ``"-2*a12*y2"`` or ``"sin(x)*y^2"``.  They are parsed into an
immutable AST and evaluated as :class:`Jet2` values carrying the exact
gradient and Hessian with respect to the chart coordinates.

Jets may be batched: evaluating at a ``(N, dim)`` array of points yields a jet
whose value has shape ``(N,)``, gradient ``(N, dim)`` and Hessian
``(N, dim, dim)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

SINGULARITY_FLOOR = 1e-12
FUNCTIONS = ("sin", "cos", "exp")


class ExprError(ValueError):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at offset {pos}")
        self.pos = pos


class EvaluationError(ExprError):
    pass


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

class Expr:
    """Base AST node.  Arithmetic operators build new nodes (no simplification)."""

    def __add__(self, other):
        return BinOp("+", self, as_expr(other))

    def __radd__(self, other):
        return BinOp("+", as_expr(other), self)

    def __sub__(self, other):
        return BinOp("-", self, as_expr(other))

    def __rsub__(self, other):
        return BinOp("-", as_expr(other), self)

    def __mul__(self, other):
        return BinOp("*", self, as_expr(other))

    def __rmul__(self, other):
        return BinOp("*", as_expr(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, as_expr(other))

    def __neg__(self):
        return Neg(self)

    def __pow__(self, k: int):
        return Pow(self, int(k))

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Fraction


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str
    kind: str  # "coord" or "param"
    index: int  # coordinate index; -1 for parameters


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exp: int


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str
    arg: Expr


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Const(Fraction(x))
    if isinstance(x, float):
        return Const(Fraction(repr(x)))
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, coords: Sequence[str], params: Sequence[str]):
        self.tokens = _tokenize(src)
        self.i = 0
        self.coords = {name: k for k, name in enumerate(coords)}
        self.params = set(params)

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        kind, text, pos = self.tok
        if text != value or kind != "op":
            raise ParseError(f"expected {value!r}", pos)
        self.advance()

    def parse(self) -> Expr:
        e = self.sum()
        kind, text, pos = self.tok
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return e

    def sum(self) -> Expr:
        e = self.product()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.advance()[1]
            e = BinOp(op, e, self.product())
        return e

    def product(self) -> Expr:
        e = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.advance()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.advance()[1]
            arg = self.unary()
            return Neg(arg) if op == "-" else arg
        return self.power()

    def power(self) -> Expr:
        e = self.atom()
        while self.tok[0] == "op" and self.tok[1] == "^":
            self.advance()
            sign = 1
            if self.tok[0] == "op" and self.tok[1] in "+-":
                sign = -1 if self.advance()[1] == "-" else 1
            kind, text, pos = self.tok
            if kind != "num":
                raise ParseError("exponent must be an integer literal", pos)
            value = Fraction(text)
            if value.denominator != 1:
                raise ParseError("exponent must be an integer literal", pos)
            self.advance()
            e = Pow(e, sign * int(value))
        return e

    def atom(self) -> Expr:
        kind, text, pos = self.tok
        if kind == "num":
            self.advance()
            return Const(Fraction(text))
        if kind == "name":
            self.advance()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.sum()
                self.expect(")")
                return Func(text, arg)
            if text in self.coords:
                return Var(text, "coord", self.coords[text])
            if text in self.params:
                return Var(text, "param", -1)
            raise ParseError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            self.advance()
            e = self.sum()
            self.expect(")")
            return e
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {text!r}", pos)


def parse_expression(src: str, coords: Sequence[str], params: Sequence[str] = ()) -> Expr:
    """Parse ``src`` into an AST whose variables resolve against coords/params."""
    clash = set(coords) & set(params)
    if clash:
        raise ExprError(f"coordinate and parameter names overlap: {sorted(clash)}")
    reserved = set(FUNCTIONS) & (set(coords) | set(params))
    if reserved:
        raise ExprError(f"reserved function names used as variables: {sorted(reserved)}")
    return _Parser(src, coords, params).parse()


# --------------------------------------------------------------------------
# Pretty printing
# --------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _const_source(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    d = v.denominator
    # exact decimal when the denominator only has factors 2 and 5
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d == 1:
        digits = max(twos, fives)
        scaled = v * 10**digits
        s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
        out = s[:-digits] + "." + s[-digits:]
        return ("-" if v < 0 else "") + out
    return f"{v.numerator}/{v.denominator}"


def to_source(e: Expr) -> str:
    """Render an AST as parseable infix text."""
    return _src(e)[0]


def _src(e: Expr) -> tuple[str, int]:
    # returns (text, precedence level); 4 = atom, 3 = power, 2.5 = unary
    if isinstance(e, Const):
        s = _const_source(e.value)
        if e.value < 0 or "/" in s:
            return f"({s})", 4
        return s, 4
    if isinstance(e, Var):
        return e.name, 4
    if isinstance(e, Func):
        return f"{e.name}({_src(e.arg)[0]})", 4
    if isinstance(e, Pow):
        b, p = _src(e.base)
        if p < 4:
            b = f"({b})"
        return f"{b}^{e.exp}", 3
    if isinstance(e, Neg):
        a, p = _src(e.arg)
        if p < 3:
            a = f"({a})"
        return f"-{a}", 2.5
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        l, pl = _src(e.left)
        r, pr = _src(e.right)
        if pl < prec:
            l = f"({l})"
        # left-associative: right operand needs parens at equal precedence
        if pr <= prec:
            r = f"({r})"
        return f"{l} {e.op} {r}", prec
    raise TypeError(e)


# --------------------------------------------------------------------------
# Jets
# --------------------------------------------------------------------------

Number = Union[float, np.ndarray]


class Jet2:
    """A value with its gradient and Hessian, propagated exactly."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def constant(cls, c: float, dim: int, batch: tuple[int, ...] = ()) -> "Jet2":
        return cls(np.full(batch, float(c)), np.zeros(batch + (dim,)), np.zeros(batch + (dim, dim)))

    @classmethod
    def variable(cls, x: np.ndarray, i: int, dim: int) -> "Jet2":
        x = np.asarray(x, dtype=float)
        grad = np.zeros(x.shape + (dim,))
        grad[..., i] = 1.0
        return cls(x.copy(), grad, np.zeros(x.shape + (dim, dim)))

    def _lift(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(other, self.dim, np.shape(self.value))

    def __add__(self, other):
        o = self._lift(other)
        return Jet2(self.value + o.value, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        a, b = self.value, o.value
        ga, gb = self.grad, o.grad
        outer = ga[..., :, None] * gb[..., None, :]
        hess = (
            self.hess * np.asarray(b)[..., None, None]
            + np.asarray(a)[..., None, None] * o.hess
            + outer
            + np.swapaxes(outer, -1, -2)
        )
        grad = ga * np.asarray(b)[..., None] + np.asarray(a)[..., None] * gb
        return Jet2(a * b, grad, hess)

    __rmul__ = __mul__

    def _chain(self, f0, f1, f2) -> "Jet2":
        g = self.grad
        f1 = np.asarray(f1)
        f2 = np.asarray(f2)
        hess = f2[..., None, None] * (g[..., :, None] * g[..., None, :]) + f1[..., None, None] * self.hess
        return Jet2(f0, f1[..., None] * g, hess)

    def reciprocal(self) -> "Jet2":
        u = np.asarray(self.value)
        if np.any(np.abs(u) <= SINGULARITY_FLOOR):
            raise EvaluationError(f"division by a value below the singularity floor {SINGULARITY_FLOOR}")
        return self._chain(1.0 / u, -1.0 / u**2, 2.0 / u**3)

    def __truediv__(self, other):
        return self * self._lift(other).reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, k: int):
        k = int(k)
        if k == 0:
            return Jet2.constant(1.0, self.dim, np.shape(self.value))
        if k < 0:
            return self.reciprocal() ** (-k)
        u = np.asarray(self.value)
        return self._chain(u**k, k * u ** (k - 1), k * (k - 1) * u ** (k - 2) if k > 1 else np.zeros_like(u))

    def sin(self) -> "Jet2":
        u = np.asarray(self.value)
        s, c = np.sin(u), np.cos(u)
        return self._chain(s, c, -s)

    def cos(self) -> "Jet2":
        u = np.asarray(self.value)
        s, c = np.sin(u), np.cos(u)
        return self._chain(c, -s, -c)

    def exp(self) -> "Jet2":
        with np.errstate(over="ignore"):
            e = np.exp(np.asarray(self.value))
        if not np.all(np.isfinite(e)):
            raise EvaluationError("exp overflow")
        return self._chain(e, e, e)

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"


def eval_jet2(e: Expr, point, params: Mapping[str, float] | None = None) -> Jet2:
    """Evaluate ``e`` as a second-order jet at ``point`` (shape ``(dim,)`` or ``(N, dim)``)."""
    pt = np.asarray(point, dtype=float)
    dim = pt.shape[-1]
    params = params or {}
    batch = pt.shape[:-1]
    cache: dict[int, Jet2] = {}

    def ev(node: Expr) -> Jet2:
        if isinstance(node, Const):
            return Jet2.constant(float(node.value), dim, batch)
        if isinstance(node, Var):
            if node.kind == "coord":
                if node.index not in cache:
                    cache[node.index] = Jet2.variable(pt[..., node.index], node.index, dim)
                return cache[node.index]
            if node.name not in params:
                raise EvaluationError(f"parameter {node.name!r} is not bound")
            return Jet2.constant(params[node.name], dim, batch)
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, BinOp):
            a, b = ev(node.left), ev(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            return a / b
        if isinstance(node, Pow):
            return ev(node.base) ** node.exp
        if isinstance(node, Func):
            return getattr(ev(node.arg), node.name)()
        raise TypeError(node)

    return ev(e)


def eval_value(e: Expr, point, params: Mapping[str, float] | None = None) -> float:
    """Plain float evaluation (no derivatives); used by finite-difference oracles."""
    params = params or {}
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Var):
        return float(point[e.index]) if e.kind == "coord" else float(params[e.name])
    if isinstance(e, Neg):
        return -eval_value(e.arg, point, params)
    if isinstance(e, BinOp):
        a, b = eval_value(e.left, point, params), eval_value(e.right, point, params)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    if isinstance(e, Pow):
        return eval_value(e.base, point, params) ** e.exp
    if isinstance(e, Func):
        return getattr(math, e.name)(eval_value(e.arg, point, params))
    raise TypeError(e)
