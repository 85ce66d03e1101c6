"""Scalar expression ASTs with exact evaluation, forward-mode derivatives and
natural interval extension.

One tree serves every consumer: point sampling, dual-number gradients,
symbolic partial derivatives and rigorous range enclosures.  Keeping a single
representation removes any chance of the sampled function and the interval
function drifting apart.

Supported operations: ``+ - * /``, integer powers (``^`` or ``**``),
``sin cos exp sqrt abs min max``.  Variables are written ``x1 .. xn``
(1-based in the text syntax, 0-based indices on the nodes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Expr",
    "Interval",
    "ExprError",
    "ExprSyntaxError",
    "DomainError",
    "NonDifferentiableError",
    "parse",
    "unparse",
    "evaluate",
    "eval_batch",
    "gradient",
    "interval_eval",
    "derivative",
    "max_var_index",
    "compile_vector_field",
    "const",
    "var",
]


class ExprError(Exception):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DomainError(ExprError):
    """Raised when a primitive is applied outside its domain (division by
    zero, sqrt of a negative value, or the interval analogues)."""

    def __init__(self, message: str, node: "Expr | None" = None):
        if node is not None:
            message = f"{message} in {unparse(node)}"
        super().__init__(message)
        self.node = node


class NonDifferentiableError(ExprError):
    """Raised when a symbolic partial derivative is requested through a
    kinked primitive (abs/min/max)."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

_UNARY = ("neg", "sin", "cos", "exp", "sqrt", "abs")
_BINARY = ("add", "sub", "mul", "div", "min", "max")


@dataclass(frozen=True)
class Expr:
    """Immutable expression node.

    ``op`` is one of: ``const``, ``var``, the unary/binary primitives above,
    or ``pow`` (integer exponent stored in ``exponent``).  Nodes are values:
    structural equality and hashing come from the dataclass machinery, and
    trees may be shared freely between threads.
    """

    op: str
    value: float = 0.0
    index: int = -1
    args: tuple["Expr", ...] = field(default=())
    exponent: int = 0

    def __post_init__(self):
        if self.op == "const":
            object.__setattr__(self, "value", float(self.value))
        elif self.op == "var":
            if self.index < 0:
                raise ValueError("variable index must be >= 0")
        elif self.op == "pow":
            if len(self.args) != 1:
                raise ValueError("pow takes one child")
        elif self.op in _UNARY:
            if len(self.args) != 1:
                raise ValueError(f"{self.op} takes one child")
        elif self.op in _BINARY:
            if len(self.args) != 2:
                raise ValueError(f"{self.op} takes two children")
        else:
            raise ValueError(f"unknown op {self.op!r}")


def const(v: float) -> Expr:
    return Expr("const", value=float(v))


def var(i: int) -> Expr:
    return Expr("var", index=i)


def _mk_unary(op: str) -> Callable[[Expr], Expr]:
    return lambda a: Expr(op, args=(a,))


def _mk_binary(op: str) -> Callable[[Expr, Expr], Expr]:
    return lambda a, b: Expr(op, args=(a, b))


neg = _mk_unary("neg")
sin = _mk_unary("sin")
cos = _mk_unary("cos")
exp = _mk_unary("exp")
sqrt = _mk_unary("sqrt")
abs_ = _mk_unary("abs")
add = _mk_binary("add")
sub = _mk_binary("sub")
div = _mk_binary("div")
min_ = _mk_binary("min")
max_ = _mk_binary("max")


def mul(a: Expr, b: Expr) -> Expr:
    # A product of two structurally identical subtrees is canonicalized to an
    # even power so the tightened interval rule applies to it.
    if a == b:
        return pow_int(a, 2)
    return Expr("mul", args=(a, b))


def pow_int(base: Expr, n: int) -> Expr:
    if n != int(n):
        raise ValueError("exponent must be an integer")
    return Expr("pow", args=(base,), exponent=int(n))


def max_var_index(e: Expr) -> int:
    """Largest variable index appearing in the tree, -1 if none."""
    if e.op == "var":
        return e.index
    if e.op == "const":
        return -1
    return max((max_var_index(a) for a in e.args), default=-1)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_FUNCS1 = {"sin": sin, "cos": cos, "exp": exp, "sqrt": sqrt, "abs": abs_}
_FUNCS2 = {"min": min_, "max": max_}


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []
        self._scan()
        self.i = 0

    def _scan(self):
        t, n = self.text, len(self.text)
        i = 0
        while i < n:
            c = t[i]
            if c.isspace():
                i += 1
                continue
            if c.isdigit() or (c == "." and i + 1 < n and t[i + 1].isdigit()):
                j = i
                while j < n and (t[j].isdigit() or t[j] == "."):
                    j += 1
                if j < n and t[j] in "eE":
                    k = j + 1
                    if k < n and t[k] in "+-":
                        k += 1
                    if k < n and t[k].isdigit():
                        j = k
                        while j < n and t[j].isdigit():
                            j += 1
                self.tokens.append(("num", t[i:j], i))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < n and (t[j].isalnum() or t[j] == "_"):
                    j += 1
                self.tokens.append(("name", t[i:j], i))
                i = j
                continue
            if t.startswith("**", i):
                self.tokens.append(("op", "^", i))
                i += 2
                continue
            if c in "+-*/^(),":
                self.tokens.append(("op", c, i))
                i += 1
                continue
            raise ExprSyntaxError(f"unexpected character {c!r}", i)
        self.tokens.append(("end", "", n))

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, val: str):
        kind, v, pos = self.next()
        if v != val:
            raise ExprSyntaxError(f"expected {val!r}, found {v or 'end of input'!r}", pos)


class _Parser:
    def __init__(self, text: str, n_vars: int):
        self.tk = _Tokenizer(text)
        self.n_vars = n_vars

    def parse(self) -> Expr:
        e = self._expr()
        kind, v, pos = self.tk.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected trailing token {v!r}", pos)
        return e

    def _expr(self) -> Expr:
        e = self._term()
        while self.tk.peek()[1] in ("+", "-"):
            op = self.tk.next()[1]
            rhs = self._term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def _term(self) -> Expr:
        e = self._factor()
        while self.tk.peek()[1] in ("*", "/"):
            op = self.tk.next()[1]
            rhs = self._factor()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def _factor(self) -> Expr:
        kind, v, pos = self.tk.peek()
        if v == "-":
            self.tk.next()
            return neg(self._factor())
        if v == "+":
            self.tk.next()
            return self._factor()
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        if self.tk.peek()[1] == "^":
            self.tk.next()
            n = self._int_exponent()
            return pow_int(base, n)
        return base

    def _int_exponent(self) -> int:
        kind, v, pos = self.tk.next()
        sign = 1
        if v in ("+", "-"):
            sign = -1 if v == "-" else 1
            kind, v, pos = self.tk.next()
        if v == "(":
            n = self._int_exponent()
            self.tk.expect(")")
            return sign * n
        if kind != "num" or any(c in v for c in ".eE"):
            raise ExprSyntaxError("power exponent must be an integer literal", pos)
        return sign * int(v)

    def _atom(self) -> Expr:
        kind, v, pos = self.tk.next()
        if kind == "num":
            return const(float(v))
        if v == "(":
            e = self._expr()
            self.tk.expect(")")
            return e
        if kind == "name":
            if v in _FUNCS1:
                self.tk.expect("(")
                a = self._expr()
                self.tk.expect(")")
                return _FUNCS1[v](a)
            if v in _FUNCS2:
                self.tk.expect("(")
                a = self._expr()
                self.tk.expect(",")
                b = self._expr()
                self.tk.expect(")")
                return _FUNCS2[v](a, b)
            if v.startswith("x") and v[1:].isdigit():
                idx = int(v[1:]) - 1
                if idx < 0 or idx >= self.n_vars:
                    raise ExprSyntaxError(
                        f"variable {v} out of range for {self.n_vars} variable(s)", pos
                    )
                return var(idx)
            raise ExprSyntaxError(f"unknown identifier {v!r}", pos)
        raise ExprSyntaxError(f"unexpected token {v or 'end of input'!r}", pos)


def parse(text: str, n_vars: int) -> Expr:
    """Parse an infix expression over x1..x{n_vars} into an AST."""
    return _Parser(text, n_vars).parse()


def unparse(e: Expr) -> str:
    """Render a tree back to text.  Fully parenthesized so that
    ``parse(unparse(t))`` reproduces the structure exactly."""
    if e.op == "const":
        return repr(e.value)
    if e.op == "var":
        return f"x{e.index + 1}"
    if e.op == "pow":
        return f"({unparse(e.args[0])}^({e.exponent}))"
    if e.op == "neg":
        return f"(-{unparse(e.args[0])})"
    if e.op in ("sin", "cos", "exp", "sqrt", "abs"):
        return f"{e.op}({unparse(e.args[0])})"
    if e.op in ("min", "max"):
        return f"{e.op}({unparse(e.args[0])}, {unparse(e.args[1])})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[e.op]
    return f"({unparse(e.args[0])} {sym} {unparse(e.args[1])})"


# ---------------------------------------------------------------------------
# Point evaluation
# ---------------------------------------------------------------------------


def evaluate(e: Expr, x: Sequence[float]) -> float:
    """Evaluate at a point with round-to-nearest arithmetic."""
    if e.op == "const":
        return e.value
    if e.op == "var":
        if e.index >= len(x):
            raise DomainError(f"point has {len(x)} coords, needs index {e.index + 1}", e)
        return float(x[e.index])
    if e.op == "pow":
        b = evaluate(e.args[0], x)
        if e.exponent < 0 and b == 0.0:
            raise DomainError("zero base with negative exponent", e)
        return float(b**e.exponent)
    a = evaluate(e.args[0], x)
    if e.op == "neg":
        return -a
    if e.op == "sin":
        return math.sin(a)
    if e.op == "cos":
        return math.cos(a)
    if e.op == "exp":
        return math.exp(a)
    if e.op == "sqrt":
        if a < 0:
            raise DomainError("sqrt of negative value", e)
        return math.sqrt(a)
    if e.op == "abs":
        return abs(a)
    b = evaluate(e.args[1], x)
    if e.op == "add":
        return a + b
    if e.op == "sub":
        return a - b
    if e.op == "mul":
        return a * b
    if e.op == "div":
        if b == 0.0:
            raise DomainError("division by zero", e)
        return a / b
    if e.op == "min":
        return min(a, b)
    return max(a, b)


def eval_batch(e: Expr, pts: np.ndarray) -> np.ndarray:
    """Vectorized evaluation over an (s, n_vars) array of points."""
    pts = np.asarray(pts, dtype=float)

    def rec(node: Expr) -> np.ndarray:
        if node.op == "const":
            return np.full(pts.shape[0], node.value)
        if node.op == "var":
            return pts[:, node.index]
        if node.op == "pow":
            b = rec(node.args[0])
            if node.exponent < 0 and np.any(b == 0.0):
                raise DomainError("zero base with negative exponent", node)
            return b ** float(node.exponent)
        a = rec(node.args[0])
        if node.op == "neg":
            return -a
        if node.op == "sin":
            return np.sin(a)
        if node.op == "cos":
            return np.cos(a)
        if node.op == "exp":
            return np.exp(a)
        if node.op == "sqrt":
            if np.any(a < 0):
                raise DomainError("sqrt of negative value", node)
            return np.sqrt(a)
        if node.op == "abs":
            return np.abs(a)
        b = rec(node.args[1])
        if node.op == "add":
            return a + b
        if node.op == "sub":
            return a - b
        if node.op == "mul":
            return a * b
        if node.op == "div":
            if np.any(b == 0.0):
                raise DomainError("division by zero", node)
            return a / b
        if node.op == "min":
            return np.minimum(a, b)
        return np.maximum(a, b)

    return rec(e)


# ---------------------------------------------------------------------------
# Forward-mode gradient
# ---------------------------------------------------------------------------


def gradient(e: Expr, x: Sequence[float]) -> np.ndarray:
    """Forward-mode gradient via vectorized dual numbers.

    At kinks the derivative is a fixed subgradient choice: abs'(0) = 1, and
    min/max break ties toward their first argument.
    """
    n = len(x)

    def rec(node: Expr) -> tuple[float, np.ndarray]:
        if node.op == "const":
            return node.value, np.zeros(n)
        if node.op == "var":
            g = np.zeros(n)
            g[node.index] = 1.0
            return float(x[node.index]), g
        if node.op == "pow":
            v, g = rec(node.args[0])
            k = node.exponent
            if k < 0 and v == 0.0:
                raise DomainError("zero base with negative exponent", node)
            if k == 0:
                return 1.0, np.zeros(n)
            return float(v**k), float(k) * float(v ** (k - 1)) * g
        v, g = rec(node.args[0])
        if node.op == "neg":
            return -v, -g
        if node.op == "sin":
            return math.sin(v), math.cos(v) * g
        if node.op == "cos":
            return math.cos(v), -math.sin(v) * g
        if node.op == "exp":
            ev = math.exp(v)
            return ev, ev * g
        if node.op == "sqrt":
            if v < 0:
                raise DomainError("sqrt of negative value", node)
            if v == 0:
                raise DomainError("sqrt derivative at zero", node)
            s = math.sqrt(v)
            return s, g / (2.0 * s)
        if node.op == "abs":
            # right-hand branch at the kink
            return abs(v), (g if v >= 0 else -g)
        w, h = rec(node.args[1])
        if node.op == "add":
            return v + w, g + h
        if node.op == "sub":
            return v - w, g - h
        if node.op == "mul":
            return v * w, w * g + v * h
        if node.op == "div":
            if w == 0.0:
                raise DomainError("division by zero", node)
            return v / w, (g * w - v * h) / (w * w)
        if node.op == "min":
            return (v, g) if v <= w else (w, h)
        return (v, g) if v >= w else (w, h)

    return rec(e)[1]


# ---------------------------------------------------------------------------
# Symbolic partial derivatives
# ---------------------------------------------------------------------------


def _is_const(e: Expr, v: float) -> bool:
    return e.op == "const" and e.value == v


def _fadd(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if a.op == "const" and b.op == "const":
        return const(a.value + b.value)
    return add(a, b)


def _fsub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if a.op == "const" and b.op == "const":
        return const(a.value - b.value)
    if _is_const(a, 0.0):
        return neg(b)
    return sub(a, b)


def _fmul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if a.op == "const" and b.op == "const":
        return const(a.value * b.value)
    return mul(a, b)


def derivative(e: Expr, j: int) -> Expr:
    """Partial derivative with respect to variable ``j`` as a new tree.

    Built with light constant folding so chained use stays compact; no other
    rewriting is performed.  Kinked primitives are rejected because the
    result would not have a continuous derivative on a box.
    """
    if e.op == "const":
        return const(0.0)
    if e.op == "var":
        return const(1.0 if e.index == j else 0.0)
    if e.op in ("abs", "min", "max"):
        raise NonDifferentiableError(
            f"symbolic derivative through {e.op} is not defined on a box"
        )
    if e.op == "pow":
        base = e.args[0]
        d = derivative(base, j)
        k = e.exponent
        if k == 0:
            return const(0.0)
        return _fmul(const(float(k)), _fmul(pow_int(base, k - 1) if k != 1 else const(1.0), d))
    if e.op == "neg":
        d = derivative(e.args[0], j)
        return const(0.0) if _is_const(d, 0.0) else neg(d)
    if e.op == "sin":
        return _fmul(cos(e.args[0]), derivative(e.args[0], j))
    if e.op == "cos":
        return _fmul(neg(sin(e.args[0])), derivative(e.args[0], j))
    if e.op == "exp":
        return _fmul(exp(e.args[0]), derivative(e.args[0], j))
    if e.op == "sqrt":
        d = derivative(e.args[0], j)
        if _is_const(d, 0.0):
            return const(0.0)
        return div(d, _fmul(const(2.0), sqrt(e.args[0])))
    a, b = e.args
    da, db = derivative(a, j), derivative(b, j)
    if e.op == "add":
        return _fadd(da, db)
    if e.op == "sub":
        return _fsub(da, db)
    if e.op == "mul":
        return _fadd(_fmul(da, b), _fmul(a, db))
    # quotient rule
    num = _fsub(_fmul(da, b), _fmul(a, db))
    if _is_const(num, 0.0):
        return const(0.0)
    return div(num, pow_int(b, 2))


# ---------------------------------------------------------------------------
# Intervals
# ---------------------------------------------------------------------------

_WIDEN_STEPS = 4  # outward-rounding slack, in ULPs per endpoint per primitive
_SQRT_GRACE = -1e-300  # absorbs widening noise at an exact zero lower bound


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi].

    Every arithmetic primitive widens its result outward by a few ULPs in
    place of directed rounding; the slack is ``_WIDEN_STEPS`` machine steps
    per endpoint, which dominates the rounding error of each primitive.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def __repr__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


def _down(v: float) -> float:
    for _ in range(_WIDEN_STEPS):
        v = math.nextafter(v, -math.inf)
    return v


def _up(v: float) -> float:
    for _ in range(_WIDEN_STEPS):
        v = math.nextafter(v, math.inf)
    return v


def _widened(lo: float, hi: float, nonneg: bool = False) -> Interval:
    lo, hi = _down(lo), _up(hi)
    if nonneg and lo < 0.0:
        lo = 0.0
    return Interval(lo, hi)


def _iadd(a: Interval, b: Interval) -> Interval:
    return _widened(a.lo + b.lo, a.hi + b.hi)


def _isub(a: Interval, b: Interval) -> Interval:
    return _widened(a.lo - b.hi, a.hi - b.lo)


def _imul(a: Interval, b: Interval) -> Interval:
    c = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return _widened(min(c), max(c))


def _idiv(a: Interval, b: Interval, node: Expr | None = None) -> Interval:
    if b.lo <= 0.0 <= b.hi:
        raise DomainError("interval division by a range containing zero", node)
    c = (a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi)
    return _widened(min(c), max(c))


def _ipow(a: Interval, k: int, node: Expr | None = None) -> Interval:
    if k == 0:
        return Interval(1.0, 1.0)
    if k < 0:
        return _idiv(Interval(1.0, 1.0), _ipow(a, -k, node), node)
    if k % 2 == 0:
        # even powers are tightened: the range never dips below zero
        lo_p, hi_p = a.lo**k, a.hi**k
        if a.lo >= 0.0:
            return _widened(lo_p, hi_p, nonneg=True)
        if a.hi <= 0.0:
            return _widened(hi_p, lo_p, nonneg=True)
        return _widened(0.0, max(lo_p, hi_p), nonneg=True)
    return _widened(a.lo**k, a.hi**k)


_TWO_PI = 2.0 * math.pi


def _peak_in(lo: float, hi: float, offset: float) -> bool:
    # Is offset + 2*pi*k inside [lo, hi] for some integer k?
    k = math.ceil((lo - offset) / _TWO_PI)
    return offset + _TWO_PI * k <= hi


def _isin(a: Interval) -> Interval:
    if a.width >= _TWO_PI:
        return Interval(-1.0, 1.0)
    lo = min(math.sin(a.lo), math.sin(a.hi))
    hi = max(math.sin(a.lo), math.sin(a.hi))
    if _peak_in(a.lo, a.hi, math.pi / 2.0):
        hi = 1.0
    if _peak_in(a.lo, a.hi, -math.pi / 2.0):
        lo = -1.0
    out = _widened(lo, hi)
    return Interval(max(out.lo, -1.0), min(out.hi, 1.0))


def _icos(a: Interval) -> Interval:
    if a.width >= _TWO_PI:
        return Interval(-1.0, 1.0)
    lo = min(math.cos(a.lo), math.cos(a.hi))
    hi = max(math.cos(a.lo), math.cos(a.hi))
    if _peak_in(a.lo, a.hi, 0.0):
        hi = 1.0
    if _peak_in(a.lo, a.hi, math.pi):
        lo = -1.0
    out = _widened(lo, hi)
    return Interval(max(out.lo, -1.0), min(out.hi, 1.0))


def _iexp(a: Interval) -> Interval:
    try:
        lo = math.exp(a.lo)
    except OverflowError:
        lo = math.inf
    try:
        hi = math.exp(a.hi)
    except OverflowError:
        hi = math.inf
    return _widened(lo, hi, nonneg=True)


def _isqrt(a: Interval, node: Expr | None = None) -> Interval:
    lo = a.lo
    if lo < 0.0:
        if lo < _SQRT_GRACE:
            raise DomainError("interval sqrt of a range below zero", node)
        lo = 0.0
    return _widened(math.sqrt(lo), math.sqrt(a.hi), nonneg=True)


def _iabs(a: Interval) -> Interval:
    if a.lo >= 0.0:
        return a
    if a.hi <= 0.0:
        return Interval(-a.hi, -a.lo)
    return Interval(0.0, max(-a.lo, a.hi))


def interval_eval(e: Expr, box: Sequence[Interval]) -> Interval:
    """Natural interval extension over a box.

    Inclusion property: for every x in the box, ``evaluate(e, x)`` lies in
    the returned interval.
    """
    if e.op == "const":
        return Interval(e.value, e.value)
    if e.op == "var":
        if e.index >= len(box):
            raise DomainError(f"box has {len(box)} coords, needs index {e.index + 1}", e)
        return box[e.index]
    if e.op == "pow":
        return _ipow(interval_eval(e.args[0], box), e.exponent, e)
    a = interval_eval(e.args[0], box)
    if e.op == "neg":
        return Interval(-a.hi, -a.lo)
    if e.op == "sin":
        return _isin(a)
    if e.op == "cos":
        return _icos(a)
    if e.op == "exp":
        return _iexp(a)
    if e.op == "sqrt":
        return _isqrt(a, e)
    if e.op == "abs":
        return _iabs(a)
    b = interval_eval(e.args[1], box)
    if e.op == "add":
        return _iadd(a, b)
    if e.op == "sub":
        return _isub(a, b)
    if e.op == "mul":
        return _imul(a, b)
    if e.op == "div":
        return _idiv(a, b, e)
    if e.op == "min":
        return Interval(min(a.lo, b.lo), min(a.hi, b.hi))
    return Interval(max(a.lo, b.lo), max(a.hi, b.hi))


# ---------------------------------------------------------------------------
# Compilation for tight simulation loops
# ---------------------------------------------------------------------------


def _py_source(e: Expr) -> str:
    if e.op == "const":
        return repr(e.value)
    if e.op == "var":
        return f"x[{e.index}]"
    if e.op == "pow":
        return f"({_py_source(e.args[0])})**({e.exponent})"
    if e.op == "neg":
        return f"(-({_py_source(e.args[0])}))"
    if e.op in ("sin", "cos", "exp", "sqrt"):
        return f"_{e.op}({_py_source(e.args[0])})"
    if e.op == "abs":
        return f"abs({_py_source(e.args[0])})"
    if e.op in ("min", "max"):
        return f"{e.op}({_py_source(e.args[0])}, {_py_source(e.args[1])})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[e.op]
    return f"({_py_source(e.args[0])} {sym} {_py_source(e.args[1])})"


def compile_vector_field(exprs: Sequence[Expr], n_vars: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a vector of trees into one fast callable x -> f(x).

    The generated code is plain scalar arithmetic over math-module
    functions; it exists so fixed-step integrators do not pay the tree-walk
    cost on every stage evaluation.
    """
    for e in exprs:
        if max_var_index(e) >= n_vars:
            raise ValueError("expression refers to a variable beyond n_vars")
    body = ",\n        ".join(_py_source(e) for e in exprs)
    src = (
        "def _f(x):\n"
        "    return np.array([\n"
        f"        {body}\n"
        "    ])\n"
    )
    ns = {
        "np": np,
        "_sin": math.sin,
        "_cos": math.cos,
        "_exp": math.exp,
        "_sqrt": math.sqrt,
    }
    exec(src, ns)  # source generated from our own AST, nothing user-supplied runs here
    return ns["_f"]
