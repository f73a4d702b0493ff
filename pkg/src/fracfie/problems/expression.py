"""Arithmetic expressions for user-defined problem terms.

Grammar (``^`` binds tightest and is right-associative, then unary minus,
then ``* /``, then ``+ -``)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

Evaluation is vectorised over numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from ..special import gamma as _gamma

__all__ = [
    "Expression",
    "ExpressionSyntaxError",
    "ExpressionEvalError",
    "parse_expression",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
]

VARIABLES = frozenset({"xi", "y", "r"})
CONSTANTS = {"pi": np.pi}


FUNCTIONS = {
    "sqrt": np.sqrt,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "gamma": _gamma,
}


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class ExpressionEvalError(ArithmeticError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: Node
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Node
    right: Node
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: Node
    offset: int = field(default=0, compare=False)


Node = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExpressionSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.peek()
        if text != value or kind == "end":
            raise ExpressionSyntaxError(f"unexpected {text or 'end of input'!r}", off, frozenset({value}))
        self.take()

    def parse(self) -> Node:
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {text!r}", off, frozenset({"+", "-", "*", "/", "^", "end of input"}))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, off = self.take()
            node = BinOp(op, node, self.term(), off)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, off = self.take()
            node = BinOp(op, node, self.unary(), off)
        return node

    def unary(self) -> Node:
        kind, text, off = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary(), off)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, text, off = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return BinOp("^", base, self.unary(), off)
        return base

    def atom(self) -> Node:
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text), off)
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg, off)
            if text in CONSTANTS:
                return Var(text, off)
            if text in VARIABLES:
                return Var(text, off)
            raise ExpressionSyntaxError(
                f"unknown name {text!r}", off, frozenset(VARIABLES | set(CONSTANTS) | set(FUNCTIONS))
            )
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionSyntaxError(
            f"unexpected {text or 'end of input'!r}", off, frozenset({"number", "name", "(", "-"})
        )


def _format(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_format(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({_format(node.arg)})"
    return f"({_format(node.left)} {node.op} {_format(node.right)})"


def _free_vars(node: Node) -> set[str]:
    if isinstance(node, Var):
        return set() if node.name in CONSTANTS else {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return _free_vars(node.operand if isinstance(node, Neg) else node.arg)
    return _free_vars(node.left) | _free_vars(node.right)


def _evaluate(node: Node, env: Mapping[str, np.ndarray]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in CONSTANTS:
            return CONSTANTS[node.name]
        try:
            return env[node.name]
        except KeyError:
            raise ExpressionEvalError(f"variable {node.name!r} is not bound", node.offset) from None
    if isinstance(node, Neg):
        return -_evaluate(node.operand, env)
    if isinstance(node, Call):
        arg = np.asarray(_evaluate(node.arg, env), dtype=float)
        if node.func == "sqrt" and np.any(arg < 0):
            raise ExpressionEvalError("sqrt of a negative number", node.offset)
        if node.func == "gamma":
            try:
                return _gamma(arg)
            except ValueError as exc:
                raise ExpressionEvalError(str(exc), node.offset) from None
        return FUNCTIONS[node.func](arg)
    a = np.asarray(_evaluate(node.left, env), dtype=float)
    b = np.asarray(_evaluate(node.right, env), dtype=float)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if np.any(b == 0):
            raise ExpressionEvalError("division by zero", node.offset)
        return a / b
    # power: a negative base needs an integer exponent
    if np.any((a < 0) & (b != np.round(b))):
        raise ExpressionEvalError("non-integer power of a negative number", node.offset)
    if np.any((a == 0) & (b < 0)):
        raise ExpressionEvalError("zero raised to a negative power", node.offset)
    return a**b


@dataclass(frozen=True)
class Expression:
    """Parsed expression; immutable and safe to share."""

    ast: Node
    source: str = field(default="", compare=False)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(_free_vars(self.ast))

    def canonical(self) -> str:
        return _format(self.ast)

    def __str__(self) -> str:
        return self.canonical()

    def evaluate(self, **env):
        with np.errstate(all="ignore"):
            out = _evaluate(self.ast, env)
        arr = np.asarray(out, dtype=float)
        if arr.ndim == 0:
            return float(arr)
        return arr

    __call__ = evaluate


def parse_expression(src: str) -> Expression:
    if not src or not src.strip():
        raise ExpressionSyntaxError("empty expression", 0, frozenset({"number", "name", "(", "-"}))
    return Expression(_Parser(src).parse(), src)
