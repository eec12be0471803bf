"""Scalar field expressions for configuration files.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ['-'] atom ['^' factor]
    atom   := number | 'x' | 'y' | 'pi' | fn '(' expr ')' | '(' expr ')'
    fn     := sin | cos | exp | sqrt | abs

``^`` is right-associative and binds tighter than unary minus, so ``-2^2`` is -4.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .grid import PeriodicGrid

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs")
VARIABLES = ("x", "y", "pi")
MAX_DEPTH = 200


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int, expected: str = ""):
        self.position = position
        self.expected = expected
        text = f"{message} at position {position}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class ExprDomainError(ValueError):
    def __init__(self, message: str, x: float, y: float):
        self.x, self.y = x, y
        super().__init__(f"{message} at sample (x={x!r}, y={y!r})")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Num, Var, Call, Neg, BinOp]


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("eof", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0
        self.depth = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos, repr(op))
        self.take()

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", self.peek()[2])

    def expr(self) -> Node:
        self.enter()
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        self.depth -= 1
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        self.enter()
        negate = False
        if self.peek()[:2] == ("op", "-"):
            self.take()
            negate = True
        node = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            node = BinOp("^", node, self.factor())
        self.depth -= 1
        return Neg(node) if negate else node

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in VARIABLES:
                return Var(text)
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            raise ExprSyntaxError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(
            f"unexpected {text or 'end of input'!r}", pos, "number, x, y, pi, function or '('"
        )


def parse(src: str | bytes) -> Node:
    """Parse ``src`` into an AST; every failure is an ExprSyntaxError."""
    if isinstance(src, (bytes, bytearray)):
        try:
            src = bytes(src).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ExprSyntaxError("invalid UTF-8", exc.start) from None
    if not isinstance(src, str):
        raise TypeError("expression source must be str or bytes")
    if src.strip() == "":
        raise ExprSyntaxError("empty expression", 0, "expression")
    p = _Parser(src)
    node = p.expr()
    kind, text, pos = p.peek()
    if kind != "eof":
        raise ExprSyntaxError(f"unexpected {text!r}", pos, "operator or end of input")
    return node


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg) or (isinstance(node, Num) and math.copysign(1.0, node.value) < 0):
        return 3
    return 4


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def pretty(node: Node) -> str:
    """Canonical text with minimal parentheses; ``parse(pretty(e)) == e``."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({pretty(node.arg)})"
    if isinstance(node, Neg):
        inner = pretty(node.operand)
        ok = _prec(node.operand) == 4 or (isinstance(node.operand, BinOp) and node.operand.op == "^")
        return "-" + (inner if ok else f"({inner})")
    op = node.op
    left, right = pretty(node.left), pretty(node.right)
    if op == "^":
        if _prec(node.left) < 4:
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < _PREC[op]:
        left = f"({left})"
    if _prec(node.right) <= _PREC[op]:
        right = f"({right})"
    sep = f" {op} " if op in "+-" else op
    return f"{left}{sep}{right}"


# ---------------------------------------------------------------------------
# evaluation

_UFUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs}


def _fail(message: str, bad: np.ndarray, x: np.ndarray, y: np.ndarray):
    idx = tuple(np.argwhere(np.broadcast_to(bad, x.shape))[0])
    raise ExprDomainError(message, float(x[idx]), float(y[idx]))


def _eval(node: Node, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(x.shape, node.value)
    if isinstance(node, Var):
        if node.name == "x":
            return x
        if node.name == "y":
            return y
        return np.full(x.shape, np.pi)
    if isinstance(node, Neg):
        return -_eval(node.operand, x, y)
    if isinstance(node, Call):
        arg = _eval(node.arg, x, y)
        if node.fn == "sqrt" and np.any(arg < 0):
            _fail("sqrt of negative value", arg < 0, x, y)
        out = _UFUNCS[node.fn](arg)
        if not np.all(np.isfinite(out)):
            _fail(f"{node.fn} overflow", ~np.isfinite(out), x, y)
        return out
    a = _eval(node.left, x, y)
    b = _eval(node.right, x, y)
    if node.op == "+":
        out = a + b
    elif node.op == "-":
        out = a - b
    elif node.op == "*":
        out = a * b
    elif node.op == "/":
        if np.any(b == 0):
            _fail("division by zero", b == 0, x, y)
        out = a / b
    else:
        if np.any((a == 0) & (b < 0)):
            _fail("zero raised to a negative power", (a == 0) & (b < 0), x, y)
        out = np.power(a, b)
        if np.any(np.isnan(out)):
            _fail("negative base with non-integer exponent", np.isnan(out), x, y)
    if not np.all(np.isfinite(out)):
        _fail(f"overflow in '{node.op}'", ~np.isfinite(out), x, y)
    return out


def evaluate_at(node: Node, x, y) -> np.ndarray:
    """Evaluate at arbitrary (broadcastable) coordinates."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    with np.errstate(all="ignore"):
        return np.array(_eval(node, x, y), dtype=float)


def evaluate(node: Node | str, grid: PeriodicGrid) -> np.ndarray:
    """Sample an expression (AST or source text) on every grid point."""
    if isinstance(node, (str, bytes)):
        node = parse(node)
    x, y = grid.coords()
    return evaluate_at(node, x, y)
