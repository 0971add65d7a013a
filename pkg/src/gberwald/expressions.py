"""Small arithmetic expression language for metric coefficient fields.

Coefficient entries in metric description files are written over the chart
variables ``x1 .. xn`` with ``+ - * / ^``, parentheses, unary sign, the
functions ``sin``, ``cos``, ``exp`` and numeric constants (``pi`` is
predefined).  The grammar is LL(1) and whitespace-insensitive:

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Expressions evaluate elementwise on numpy arrays and support symbolic
differentiation with respect to chart variables, which is what gives
expression-backed coefficient fields exact x-derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("sin", "cos", "exp")
CONSTANTS = {"pi": math.pi}


class ExpressionError(ValueError):
    """Syntax or evaluation error; carries 1-based line/column."""

    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


Expr = Num | Var | Call | Neg | BinOp


# ---------------------------------------------------------------------------
# Tokenizer

_OPS = set("+-*/^(),")


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    line: int
    col: int


def tokenize(source: str, line_offset: int = 0, col_offset: int = 0) -> list[Token]:
    """Split ``source`` into tokens, tracking 1-based line/column positions.

    ``line_offset``/``col_offset`` shift reported positions so expressions
    embedded in a larger file blame the right place.
    """
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1

    def pos() -> tuple[int, int]:
        if line == 1:
            return line + line_offset, col + col_offset
        return line + line_offset, col

    while i < len(source):
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch in _OPS:
            tokens.append(Token("op", ch, *pos()))
            i += 1
            col += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < len(source) and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                seen_dot = seen_dot or source[j] == "."
                j += 1
            # optional exponent part: e[+-]?digits
            if j < len(source) and source[j] in "eE":
                k = j + 1
                if k < len(source) and source[k] in "+-":
                    k += 1
                if k < len(source) and source[k].isdigit():
                    while k < len(source) and source[k].isdigit():
                        k += 1
                    j = k
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ExpressionError(f"malformed number {text!r}", *pos()) from None
            tokens.append(Token("num", text, *pos()))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(source) and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token("ident", source[i:j], *pos()))
            col += j - i
            i = j
            continue
        raise ExpressionError(f"unexpected character {ch!r}", *pos())
    tokens.append(Token("end", "", *pos()))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ExpressionError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.next()

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.next().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.next().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text in "+-":
            self.next()
            inner = self.unary()
            return inner if tok.text == "+" else Neg(inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.next()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.next()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ident":
            if self.peek().kind == "op" and self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {tok.text!r}", tok.line, tok.col)
                self.next()
                arg = self.expr()
                self.expect_op(")")
                return Call(tok.text, arg)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        shown = tok.text or "end of input"
        raise ExpressionError(f"expected a value, found {shown!r}", tok.line, tok.col)


def parse_expression(source: str, line_offset: int = 0, col_offset: int = 0) -> Expr:
    """Parse ``source`` into an AST; positions in errors honor the offsets."""
    return _Parser(tokenize(source, line_offset, col_offset)).parse()


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(node: Expr, env: dict[str, np.ndarray | float]):
    """Evaluate elementwise over the arrays in ``env``."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExpressionError(f"unknown variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Call):
        arg = evaluate(node.arg, env)
        if node.fn == "sin":
            return np.sin(arg)
        if node.fn == "cos":
            return np.cos(arg)
        return np.exp(arg)
    left = evaluate(node.left, env)
    right = evaluate(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return np.divide(left, right)
    return np.power(left, right)


def variables(node: Expr) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return variables(node.arg)
    if isinstance(node, Call):
        return variables(node.arg)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set()


# ---------------------------------------------------------------------------
# Symbolic differentiation (with light constant folding so derivative trees
# stay small)


def _num(value: float) -> Num:
    return Num(float(value))


_ZERO = _num(0.0)
_ONE = _num(1.0)


def _is_const(node: Expr, value: float | None = None) -> bool:
    return isinstance(node, Num) and (value is None or node.value == value)


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return Neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value * b.value)
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return _ZERO
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return _num(a.value / b.value)
    return BinOp("/", a, b)


def differentiate(node: Expr, var: str) -> Expr:
    """Symbolic d(node)/d(var).

    Exponents must not depend on ``var`` (general u^v needs a logarithm,
    which the language does not have); that corner raises ExpressionError.
    """
    if isinstance(node, Num):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.name == var else _ZERO
    if isinstance(node, Neg):
        d = differentiate(node.arg, var)
        return _ZERO if _is_const(d, 0.0) else Neg(d)
    if isinstance(node, Call):
        inner = differentiate(node.arg, var)
        if _is_const(inner, 0.0):
            return _ZERO
        if node.fn == "sin":
            outer: Expr = Call("cos", node.arg)
        elif node.fn == "cos":
            outer = Neg(Call("sin", node.arg))
        else:
            outer = Call("exp", node.arg)
        return _mul(outer, inner)
    if node.op == "+":
        return _add(differentiate(node.left, var), differentiate(node.right, var))
    if node.op == "-":
        return _sub(differentiate(node.left, var), differentiate(node.right, var))
    if node.op == "*":
        return _add(
            _mul(differentiate(node.left, var), node.right),
            _mul(node.left, differentiate(node.right, var)),
        )
    if node.op == "/":
        du = differentiate(node.left, var)
        dv = differentiate(node.right, var)
        if _is_const(dv, 0.0):
            return _div(du, node.right)
        num = _sub(_mul(du, node.right), _mul(node.left, dv))
        return _div(num, BinOp("^", node.right, _num(2.0)))
    # power: u^c with c independent of var
    if var in variables(node.right):
        raise ExpressionError("cannot differentiate a power with the variable in the exponent")
    du = differentiate(node.left, var)
    if _is_const(du, 0.0):
        return _ZERO
    if isinstance(node.right, Num):
        c = node.right.value
        if c == 1.0:
            return du
        new_pow: Expr = (
            node.left if c == 2.0 else BinOp("^", node.left, _num(c - 1.0))
        )
        return _mul(_mul(_num(c), new_pow), du)
    exponent = _sub(node.right, _ONE)
    return _mul(_mul(node.right, BinOp("^", node.left, exponent)), du)


# ---------------------------------------------------------------------------
# Rendering (used by metric-file round trips)

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _render(node: Expr) -> tuple[str, int]:
    if isinstance(node, Num):
        if node.value < 0:
            return f"({node.value!r})", 5
        text = repr(node.value)
        return (text[:-2] if text.endswith(".0") else text), 5
    if isinstance(node, Var):
        return node.name, 5
    if isinstance(node, Call):
        return f"{node.fn}({_render(node.arg)[0]})", 5
    if isinstance(node, Neg):
        inner, prec = _render(node.arg)
        if prec < _PRECEDENCE["neg"]:
            inner = f"({inner})"
        return f"-{inner}", _PRECEDENCE["neg"]
    prec = _PRECEDENCE[node.op]
    left, lp = _render(node.left)
    right, rp = _render(node.right)
    # left operand needs parens when looser; for - / ^ also when equal (non-
    # associative sides)
    if lp < prec or (node.op == "^" and lp == prec):
        left = f"({left})"
    if rp < prec or (node.op in "-/" and rp == prec):
        right = f"({right})"
    return f"{left} {node.op} {right}" if node.op != "^" else f"{left}{node.op}{right}", prec


def to_source(node: Expr) -> str:
    """Render an AST back to parseable source text."""
    return _render(node)[0]
