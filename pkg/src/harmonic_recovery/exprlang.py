"""Scalar field expressions f(x, y) for run configurations.

Grammar (Pratt parser, loosest to tightest)::

    + -        left-assoc, binding power 10
    * /        left-assoc, binding power 20
    unary -/+  binding power 30
    ^          right-assoc, binding power 40

so ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``. Variables are ``x``
and ``y``; constants ``pi`` and ``e``; functions ``sin cos exp log sqrt abs``
take one argument.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "exp": (math.exp, np.exp),
    "log": (math.log, np.log),
    "sqrt": (math.sqrt, np.sqrt),
    "abs": (abs, np.abs),
}
CONSTANTS = {"pi": math.pi, "e": math.e}
VARIABLES = ("x", "y")
ALLOWED_NAMES = tuple(VARIABLES) + tuple(CONSTANTS) + tuple(FUNCTIONS)

_BINARY_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_PREFIX_BP = 30


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset, expected):
        self.offset = offset
        self.expected = expected
        super().__init__(f"{message} at byte {offset} (expected {expected})")


class UnknownIdentifierError(ExprError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(
            f"unknown identifier {name!r} at byte {offset}; "
            f"allowed names: {', '.join(ALLOWED_NAMES)}"
        )


class ExprDomainError(ExprError, ArithmeticError):
    def __init__(self, message, subexpr):
        self.subexpr = subexpr
        super().__init__(f"{message} in {subexpr}")


# AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


@dataclass(frozen=True)
class FieldExpr:
    """A parsed expression together with its source text."""

    ast: object
    source: str

    def __call__(self, x, y):
        return eval_field(self, (x, y))

    def __str__(self):
        return to_source(self.ast)


# Tokenizer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str  # "num", "name", "op", "end"
    text: str
    offset: int  # byte offset into the UTF-8 source


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        offset = len(src[:pos].encode("utf-8"))
        if m is None:
            raise ExprSyntaxError(
                f"unexpected character {src[pos]!r}", offset, "number, name, operator or parenthesis"
            )
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), offset))
        pos = m.end()
    tokens.append(_Token("end", "", len(src.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, src):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def current(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.current
        if tok.kind != "op" or tok.text != text:
            raise ExprSyntaxError(f"unexpected {_describe(tok)}", tok.offset, repr(text))
        self.advance()

    def parse(self):
        node = self.expression(0)
        tok = self.current
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {_describe(tok)}", tok.offset, "operator or end of input")
        return node

    def expression(self, min_bp):
        left = self.prefix()
        while True:
            tok = self.current
            if tok.kind != "op" or tok.text not in _BINARY_BP:
                break
            bp = _BINARY_BP[tok.text]
            if bp <= min_bp:
                break
            self.advance()
            # right-associative power: parse the exponent at a slightly lower power
            right = self.expression(bp - 1 if tok.text == "^" else bp)
            left = Binary(tok.text, left, right)
        return left

    def prefix(self):
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in CONSTANTS:
                return Const(tok.text)
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expression(0)
                self.expect(")")
                return Call(tok.text, arg)
            raise UnknownIdentifierError(tok.text, tok.offset)
        if tok.kind == "op" and tok.text in ("-", "+"):
            return Unary(tok.text, self.expression(_PREFIX_BP))
        if tok.kind == "op" and tok.text == "(":
            node = self.expression(0)
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {_describe(tok)}", tok.offset, "number, name, '(' or unary sign")


def _describe(tok):
    return "end of input" if tok.kind == "end" else f"{tok.text!r}"


def parse_field(src: str) -> FieldExpr:
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", 0, "an expression")
    return FieldExpr(_Parser(src).parse(), src)


def to_source(node) -> str:
    """Fully parenthesized source text; re-parses to an equivalent tree."""
    if isinstance(node, FieldExpr):
        node = node.ast
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Unary):
        return f"({node.op}{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# Evaluation -----------------------------------------------------------------

def _check(value, node):
    if not math.isfinite(value):
        raise ExprDomainError("non-finite result", to_source(node))
    return value


def _eval(node, x, y):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x if node.name == "x" else y
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Unary):
        v = _eval(node.operand, x, y)
        return -v if node.op == "-" else v
    if isinstance(node, Call):
        a = _eval(node.arg, x, y)
        if node.func == "log" and a <= 0.0:
            raise ExprDomainError("log of non-positive argument", to_source(node))
        if node.func == "sqrt" and a < 0.0:
            raise ExprDomainError("sqrt of negative argument", to_source(node))
        try:
            return _check(FUNCTIONS[node.func][0](a), node)
        except OverflowError:
            raise ExprDomainError("overflow", to_source(node)) from None
    a = _eval(node.left, x, y)
    b = _eval(node.right, x, y)
    op = node.op
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op == "/":
        if b == 0.0:
            raise ExprDomainError("division by zero", to_source(node))
        r = a / b
    else:
        if a < 0.0 and not float(b).is_integer():
            raise ExprDomainError("negative base with non-integer exponent", to_source(node))
        if a == 0.0 and b < 0.0:
            raise ExprDomainError("zero to a negative power", to_source(node))
        try:
            r = math.pow(a, b)
        except OverflowError:
            raise ExprDomainError("overflow", to_source(node)) from None
    return _check(r, node)


def eval_field(expr: FieldExpr, point) -> float:
    """Evaluate at one point in double precision."""
    x, y = point
    return float(_eval(expr.ast, float(x), float(y)))


def _eval_array(node, x, y):
    if isinstance(node, Num):
        return np.full_like(x, node.value)
    if isinstance(node, Var):
        return x if node.name == "x" else y
    if isinstance(node, Const):
        return np.full_like(x, CONSTANTS[node.name])
    if isinstance(node, Unary):
        v = _eval_array(node.operand, x, y)
        return -v if node.op == "-" else v
    if isinstance(node, Call):
        a = _eval_array(node.arg, x, y)
        if node.func == "log" and np.any(a <= 0.0):
            raise ExprDomainError("log of non-positive argument", to_source(node))
        if node.func == "sqrt" and np.any(a < 0.0):
            raise ExprDomainError("sqrt of negative argument", to_source(node))
        r = FUNCTIONS[node.func][1](a)
    else:
        a = _eval_array(node.left, x, y)
        b = _eval_array(node.right, x, y)
        op = node.op
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            if np.any(b == 0.0):
                raise ExprDomainError("division by zero", to_source(node))
            r = a / b
        else:
            if np.any((a < 0.0) & (b != np.round(b))):
                raise ExprDomainError("negative base with non-integer exponent", to_source(node))
            if np.any((a == 0.0) & (b < 0.0)):
                raise ExprDomainError("zero to a negative power", to_source(node))
            r = np.power(a, b)
    if not np.all(np.isfinite(r)):
        raise ExprDomainError("non-finite result", to_source(node))
    return r


def eval_field_array(expr: FieldExpr, x, y) -> np.ndarray:
    """Vectorized evaluation over coordinate arrays of equal shape."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x, y = np.broadcast_arrays(x, y)
    with np.errstate(all="ignore"):
        return np.array(_eval_array(expr.ast, x, y), dtype=np.float64)


def is_zero(expr: FieldExpr) -> bool:
    """True when the expression is a literal zero (possibly signed)."""
    node = expr.ast
    while isinstance(node, Unary):
        node = node.operand
    return isinstance(node, Num) and node.value == 0.0
