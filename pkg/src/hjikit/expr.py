"""Arithmetic expression DSL over state variables x1..xn and input variables u1..um.

Grammar (standard precedence, left-associative):

    expr    := term  (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | atom
    atom    := NUMBER | VARIABLE | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

Variables are ``x1..xn`` and ``u1..um``.  The function set is fixed:
``abs``, ``sign``, ``min``, ``max``, ``sqrt``, ``cbrt``, ``pow``, ``spow``.
``pow(a, b)`` means ``|a|**b`` and ``spow(a, b)`` means ``sign(a)*|a|**b``;
``cbrt`` is the real (sign-preserving) cube root, so ``cbrt(x)**4`` / ``pow(cbrt(x), 4)``
encode the real reading of ``x**(4/3)``.  There is no generic ``a^q`` with a
fractional literal exponent and no conditional construct; piecewise functions
are assembled from ``min``/``max``/``abs``/``sign``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import HjikitError


class ExprSyntaxError(HjikitError):
    """Raised when a source string fails to parse; carries the 0-based position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class EvalError(HjikitError):
    """Raised on domain errors during evaluation (division by zero, sqrt of a negative)."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # 'x' or 'u'
    index: int  # 0-based


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Expr = Union[Num, Var, Neg, Bin, Call]

FUNCTION_ARITY = {
    "abs": 1,
    "sign": 1,
    "sqrt": 1,
    "cbrt": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
    "spow": 2,
}


def _cbrt(v: float) -> float:
    # math.cbrt only exists on 3.11+; copysign keeps the real-root reading.
    return math.copysign(abs(v) ** (1.0 / 3.0), v)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_OPS = set("+-*/(),")


class _Tokenizer:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    def peek(self):
        self._skip_ws()
        if self.pos >= len(self.src):
            return ("eof", "", self.pos)
        ch = self.src[self.pos]
        if ch in _OPS:
            return ("op", ch, self.pos)
        if ch.isdigit() or ch == ".":
            return self._number()
        if ch.isalpha() or ch == "_":
            return self._ident()
        raise ExprSyntaxError(f"unexpected character {ch!r}", self.pos)

    def next(self):
        tok = self.peek()
        self.pos = tok[2] + len(tok[1])
        return tok

    def _skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _number(self):
        start = self.pos
        i = start
        src = self.src
        while i < len(src) and (src[i].isdigit() or src[i] == "."):
            i += 1
        if i < len(src) and src[i] in "eE":
            j = i + 1
            if j < len(src) and src[j] in "+-":
                j += 1
            if j < len(src) and src[j].isdigit():
                i = j
                while i < len(src) and src[i].isdigit():
                    i += 1
        text = src[start:i]
        try:
            float(text)
        except ValueError:
            raise ExprSyntaxError(f"malformed number {text!r}", start) from None
        return ("num", text, start)

    def _ident(self):
        start = self.pos
        i = start
        src = self.src
        while i < len(src) and (src[i].isalnum() or src[i] == "_"):
            i += 1
        return ("ident", src[start:i], start)


class _Parser:
    def __init__(self, src: str, n: int, m: int):
        if not src or not src.strip():
            raise ExprSyntaxError("empty expression", 0)
        self.toks = _Tokenizer(src)
        self.n = n
        self.m = m

    def parse(self) -> Expr:
        e = self._expr()
        kind, text, pos = self.toks.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return e

    def _expr(self) -> Expr:
        e = self._term()
        while True:
            kind, text, _ = self.toks.peek()
            if kind == "op" and text in "+-":
                self.toks.next()
                e = Bin(text, e, self._term())
            else:
                return e

    def _term(self) -> Expr:
        e = self._unary()
        while True:
            kind, text, _ = self.toks.peek()
            if kind == "op" and text in "*/":
                self.toks.next()
                e = Bin(text, e, self._unary())
            else:
                return e

    def _unary(self) -> Expr:
        kind, text, _ = self.toks.peek()
        if kind == "op" and text == "-":
            self.toks.next()
            return Neg(self._unary())
        return self._atom()

    def _atom(self) -> Expr:
        kind, text, pos = self.toks.next()
        if kind == "num":
            return Num(float(text))
        if kind == "op" and text == "(":
            e = self._expr()
            self._expect(")")
            return e
        if kind == "ident":
            nxt_kind, nxt_text, _ = self.toks.peek()
            if nxt_kind == "op" and nxt_text == "(":
                return self._call(text, pos)
            return self._variable(text, pos)
        raise ExprSyntaxError(f"unexpected token {text!r}", pos)

    def _call(self, name: str, pos: int) -> Call:
        if name not in FUNCTION_ARITY:
            raise ExprSyntaxError(f"unknown function {name!r}", pos)
        self._expect("(")
        args = [self._expr()]
        while True:
            kind, text, _ = self.toks.peek()
            if kind == "op" and text == ",":
                self.toks.next()
                args.append(self._expr())
            else:
                break
        self._expect(")")
        arity = FUNCTION_ARITY[name]
        if len(args) != arity:
            raise ExprSyntaxError(
                f"{name} takes {arity} argument(s), got {len(args)}", pos)
        return Call(name, tuple(args))

    def _variable(self, name: str, pos: int) -> Var:
        head, tail = name[0], name[1:]
        if head not in ("x", "u") or not tail.isdigit():
            raise ExprSyntaxError(f"unknown identifier {name!r}", pos)
        index = int(tail)
        bound = self.n if head == "x" else self.m
        if not 1 <= index <= bound:
            raise ExprSyntaxError(
                f"variable {name!r} out of range (declared {head}-dimension is {bound})", pos)
        return Var(head, index - 1)

    def _expect(self, ch: str):
        kind, text, pos = self.toks.next()
        if kind != "op" or text != ch:
            raise ExprSyntaxError(f"expected {ch!r}, got {text!r}", pos)


def parse(src: str, n: int, m: int) -> Expr:
    """Parse ``src`` into an AST over x1..xn, u1..um.

    Raises :class:`ExprSyntaxError` (with position) on malformed input, unknown
    identifiers, arity mismatches, or variable indices outside the declared
    dimensions.
    """
    return _Parser(src, n, m).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(e: Expr, x: Sequence[float] = (), u: Sequence[float] = ()) -> float:
    """Evaluate an AST at the point (x, u) in IEEE double precision.

    Raises :class:`EvalError` on division by zero or sqrt of a negative number.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        vec = x if e.kind == "x" else u
        return float(vec[e.index])
    if isinstance(e, Neg):
        return -evaluate(e.arg, x, u)
    if isinstance(e, Bin):
        a = evaluate(e.lhs, x, u)
        b = evaluate(e.rhs, x, u)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise EvalError("division by zero")
        return a / b
    if isinstance(e, Call):
        args = [evaluate(a, x, u) for a in e.args]
        return _apply(e.fn, args)
    raise TypeError(f"not an Expr node: {e!r}")


def _apply(fn: str, args: list) -> float:
    if fn == "abs":
        return abs(args[0])
    if fn == "sign":
        v = args[0]
        return 0.0 if v == 0 else math.copysign(1.0, v)
    if fn == "sqrt":
        if args[0] < 0:
            raise EvalError("sqrt of a negative number")
        return math.sqrt(args[0])
    if fn == "cbrt":
        return _cbrt(args[0])
    if fn == "min":
        return min(args)
    if fn == "max":
        return max(args)
    if fn == "pow":
        return abs(args[0]) ** args[1]
    if fn == "spow":
        v = args[0]
        s = 0.0 if v == 0 else math.copysign(1.0, v)
        return s * abs(v) ** args[1]
    raise TypeError(f"unknown function {fn!r}")


# ---------------------------------------------------------------------------
# Pretty-printing (round-trips through parse to a structurally identical AST)
# ---------------------------------------------------------------------------

def to_source(e: Expr) -> str:
    """Render an AST back to source; ``parse(to_source(e))`` is structurally equal to ``e``."""
    return _fmt(e, 0)


# precedence levels: 1 = additive, 2 = multiplicative, 3 = unary/atom
def _fmt(e: Expr, parent_level: int) -> str:
    if isinstance(e, Num):
        s = repr(e.value)
        return f"({s})" if e.value < 0 else s
    if isinstance(e, Var):
        return f"{e.kind}{e.index + 1}"
    if isinstance(e, Neg):
        inner = f"-{_fmt(e.arg, 3)}"
        return f"({inner})" if parent_level >= 3 else inner
    if isinstance(e, Bin):
        level = 1 if e.op in "+-" else 2
        # right child needs a bump for non-associative rendering: a-(b-c), a/(b/c)
        lhs = _fmt(e.lhs, level)
        rhs = _fmt(e.rhs, level + 1)
        s = f"{e.op}".join([lhs, rhs])
        return f"({s})" if parent_level > level else s
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(_fmt(a, 0) for a in e.args)})"
    raise TypeError(f"not an Expr node: {e!r}")


# ---------------------------------------------------------------------------
# Compiled (vectorized) evaluation for hot paths
# ---------------------------------------------------------------------------

def compile_evaluator(e: Expr) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Compile an AST into a numpy closure ``f(X, U) -> values``.

    ``X`` has shape (..., n) and ``U`` shape (..., m); the result has shape (...,).
    This is the fast path used by sweeps and integrators; it assumes inputs on
    which scalar evaluation would not raise (no division by zero, no sqrt of a
    negative), and lets IEEE nan/inf propagate otherwise.
    """
    if isinstance(e, Num):
        v = e.value
        return lambda X, U: np.full(np.shape(X)[:-1], v)
    if isinstance(e, Var):
        i = e.index
        if e.kind == "x":
            return lambda X, U: np.asarray(X)[..., i]
        return lambda X, U: np.asarray(U)[..., i]
    if isinstance(e, Neg):
        f = compile_evaluator(e.arg)
        return lambda X, U: -f(X, U)
    if isinstance(e, Bin):
        fa = compile_evaluator(e.lhs)
        fb = compile_evaluator(e.rhs)
        op = e.op
        if op == "+":
            return lambda X, U: fa(X, U) + fb(X, U)
        if op == "-":
            return lambda X, U: fa(X, U) - fb(X, U)
        if op == "*":
            return lambda X, U: fa(X, U) * fb(X, U)
        return lambda X, U: fa(X, U) / fb(X, U)
    if isinstance(e, Call):
        fs = [compile_evaluator(a) for a in e.args]
        fn = e.fn
        if fn == "abs":
            f0 = fs[0]
            return lambda X, U: np.abs(f0(X, U))
        if fn == "sign":
            f0 = fs[0]
            return lambda X, U: np.sign(f0(X, U))
        if fn == "sqrt":
            f0 = fs[0]
            return lambda X, U: np.sqrt(f0(X, U))
        if fn == "cbrt":
            f0 = fs[0]
            return lambda X, U: np.cbrt(f0(X, U))
        if fn == "min":
            f0, f1 = fs
            return lambda X, U: np.minimum(f0(X, U), f1(X, U))
        if fn == "max":
            f0, f1 = fs
            return lambda X, U: np.maximum(f0(X, U), f1(X, U))
        if fn == "pow":
            f0, f1 = fs
            return lambda X, U: np.abs(f0(X, U)) ** f1(X, U)
        if fn == "spow":
            f0, f1 = fs
            def _spow(X, U):
                a = f0(X, U)
                return np.sign(a) * np.abs(a) ** f1(X, U)
            return _spow
    raise TypeError(f"not an Expr node: {e!r}")


def variables_used(e: Expr) -> set:
    """Collect the (kind, 0-based index) pairs referenced by an AST."""
    out: set = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add((node.kind, node.index))
        elif isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, Bin):
            stack.extend((node.lhs, node.rhs))
        elif isinstance(node, Call):
            stack.extend(node.args)
    return out
