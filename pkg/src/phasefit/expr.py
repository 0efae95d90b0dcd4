"""Integer expression language for data generators and trial models.

Grammar (standard precedence: power > unary minus > multiply/divide > add/subtract):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*     -- '/' divisor must be a positive integer literal
    factor := '-' factor | atom ('^' INT)?
    atom   := INT | x<i> | y<j> | '(' expr ')'

Inputs x1..xd and parameters y1..yk are integers.  Evaluation is exact: node
values are integers or exact rationals (introduced only by '/'), and a single
round-half-to-even is applied to the final value, so fractional coefficients
like ``(y1/4)*x1`` keep full precision until the end.  Any node whose value
leaves the signed 63-bit range raises EvaluationOverflowError instead of
wrapping; reduction modulo a phase modulus is the caller's business.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Union

import numpy as np

from .errors import EvaluationOverflowError, ExprSyntaxError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
# fast vectorized path requires this much headroom at every node
_VECTOR_SAFE_BOUND = 2**62


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, x<index>


@dataclass(frozen=True)
class Param:
    index: int  # 1-based, y<index>


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Sub:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Mul:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int  # literal, >= 0


@dataclass(frozen=True)
class Scale:
    node: "Node"
    num: int
    den: int  # > 0


Node = Union[Lit, Var, Param, Add, Sub, Mul, Pow, Scale]


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_SYMBOLS = set("+-*/^()")


@dataclass(frozen=True)
class _Token:
    kind: str  # 'int' | 'name' | one of _SYMBOLS | 'end'
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(source):
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(source) and source[j].isdigit():
                j += 1
            tokens.append(_Token("int", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(source) and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("name", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in _SYMBOLS:
            tokens.append(_Token(ch, ch, line, col))
            col += 1
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], n_vars: int, n_params: int):
        self.tokens = tokens
        self.pos = 0
        self.n_vars = n_vars
        self.n_params = n_params

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.text or "end of input"
            raise ExprSyntaxError(f"expected {kind!r}, found {shown!r}", tok.line, tok.column)
        return self.advance()

    def parse_expr(self) -> Node:
        node = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.advance().kind
            rhs = self.parse_term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def parse_term(self) -> Node:
        node = self.parse_factor()
        while self.peek().kind in ("*", "/"):
            op = self.advance()
            if op.kind == "*":
                node = Mul(node, self.parse_factor())
            else:
                den_tok = self.expect("int")
                den = int(den_tok.text)
                if den == 0:
                    raise ExprSyntaxError("division by zero", den_tok.line, den_tok.column)
                node = Scale(node, 1, den)
        return node

    def parse_factor(self) -> Node:
        tok = self.peek()
        if tok.kind == "-":
            self.advance()
            inner = self.parse_factor()
            if isinstance(inner, Lit):
                return Lit(-inner.value)
            return Sub(Lit(0), inner)
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_atom()
        if self.peek().kind == "^":
            caret = self.advance()
            exp_tok = self.peek()
            if exp_tok.kind != "int":
                raise ExprSyntaxError(
                    "exponent must be a nonnegative integer literal", caret.line, caret.column
                )
            self.advance()
            return Pow(base, int(exp_tok.text))
        return base

    def parse_atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "int":
            return Lit(int(tok.text))
        if tok.kind == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        if tok.kind == "name":
            return self._resolve_name(tok)
        shown = tok.text or "end of input"
        raise ExprSyntaxError(f"unexpected {shown!r}", tok.line, tok.column)

    def _resolve_name(self, tok: _Token) -> Node:
        name = tok.text
        kind, digits = name[:1], name[1:]
        if kind not in ("x", "y") or not digits.isdigit() or digits.startswith("0"):
            raise ExprSyntaxError(f"unknown identifier {name!r}", tok.line, tok.column)
        index = int(digits)
        limit = self.n_vars if kind == "x" else self.n_params
        if index > limit:
            raise ExprSyntaxError(
                f"{name!r} exceeds declared arity ({kind} count is {limit})", tok.line, tok.column
            )
        return Var(index) if kind == "x" else Param(index)


def parse(source: str, arity: tuple[int, int]) -> Node:
    """Parse ``source`` against ``arity = (d, k)`` input/parameter counts."""
    if not source.strip():
        raise ExprSyntaxError("empty expression", 1, 1)
    parser = _Parser(_tokenize(source), arity[0], arity[1])
    node = parser.parse_expr()
    end = parser.peek()
    if end.kind != "end":
        raise ExprSyntaxError(f"unexpected {end.text!r} after expression", end.line, end.column)
    return node


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 4, 5


def _level(node: Node) -> int:
    if isinstance(node, (Add, Sub)):
        return _LEVEL_ADD
    if isinstance(node, (Mul, Scale)):
        return _LEVEL_MUL
    if isinstance(node, Pow):
        return _LEVEL_POW
    return _LEVEL_ATOM


def to_source(node: Node) -> str:
    """Render a parseable source string; parse(to_source(a)) == a."""

    def render(n: Node, min_level: int) -> str:
        text, lvl = _render(n)
        return f"({text})" if lvl < min_level else text

    def _render(n: Node) -> tuple[str, int]:
        if isinstance(n, Lit):
            return str(n.value), _LEVEL_ATOM if n.value >= 0 else _LEVEL_MUL
        if isinstance(n, Var):
            return f"x{n.index}", _LEVEL_ATOM
        if isinstance(n, Param):
            return f"y{n.index}", _LEVEL_ATOM
        if isinstance(n, Add):
            return f"{render(n.left, _LEVEL_ADD)} + {render(n.right, _LEVEL_ADD + 1)}", _LEVEL_ADD
        if isinstance(n, Sub):
            return f"{render(n.left, _LEVEL_ADD)} - {render(n.right, _LEVEL_ADD + 1)}", _LEVEL_ADD
        if isinstance(n, Mul):
            return f"{render(n.left, _LEVEL_MUL)} * {render(n.right, _LEVEL_MUL + 1)}", _LEVEL_MUL
        if isinstance(n, Scale):
            inner = render(n.node, _LEVEL_MUL)
            if n.num != 1:
                inner = f"({inner} * {n.num})"
            return f"{inner} / {n.den}", _LEVEL_MUL
        if isinstance(n, Pow):
            return f"{render(n.base, _LEVEL_ATOM)}^{n.exponent}", _LEVEL_POW
        raise TypeError(f"not an AST node: {n!r}")

    return _render(node)[0]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_count_lock = threading.Lock()
_evaluation_count = 0


def _count(n: int) -> None:
    global _evaluation_count
    with _count_lock:
        _evaluation_count += n


def evaluation_count() -> int:
    """Total number of pointwise model evaluations since the last reset."""
    return _evaluation_count


def reset_evaluation_count() -> None:
    global _evaluation_count
    with _count_lock:
        _evaluation_count = 0


def _check_magnitude(value, node: Node):
    if not (INT64_MIN <= value <= INT64_MAX):
        raise EvaluationOverflowError(
            f"value of {to_source(node)!r} leaves the 63-bit integer range"
        )
    return value


def _eval_exact(node: Node, x, y):
    """Exact value (int or Fraction) with per-node range checks."""
    if isinstance(node, Lit):
        return _check_magnitude(node.value, node)
    if isinstance(node, Var):
        return _check_magnitude(x[node.index - 1], node)
    if isinstance(node, Param):
        return _check_magnitude(y[node.index - 1], node)
    if isinstance(node, Add):
        return _check_magnitude(_eval_exact(node.left, x, y) + _eval_exact(node.right, x, y), node)
    if isinstance(node, Sub):
        return _check_magnitude(_eval_exact(node.left, x, y) - _eval_exact(node.right, x, y), node)
    if isinstance(node, Mul):
        return _check_magnitude(_eval_exact(node.left, x, y) * _eval_exact(node.right, x, y), node)
    if isinstance(node, Pow):
        return _check_magnitude(_eval_exact(node.base, x, y) ** node.exponent, node)
    if isinstance(node, Scale):
        return _check_magnitude(
            Fraction(node.num * _eval_exact(node.node, x, y), node.den), node
        )
    raise TypeError(f"not an AST node: {node!r}")


def round_half_even(value) -> int:
    """Round an exact int/Fraction to the nearest integer, ties to even."""
    if isinstance(value, int):
        return value
    num, den = value.numerator, value.denominator  # den > 0
    q, r = divmod(num, den)
    twice = 2 * r
    if twice > den or (twice == den and q % 2 != 0):
        q += 1
    return q


def evaluate(node: Node, x=(), y=()) -> int:
    """Evaluate at integer points; exact arithmetic, one final rounding."""
    _count(1)
    return _check_magnitude(round_half_even(_eval_exact(node, x, y)), node)


# --- vectorized evaluation -------------------------------------------------

def _input_interval(value) -> tuple[int, int]:
    arr = np.asarray(value)
    if arr.size == 0:
        return (0, 0)
    return (int(arr.min()), int(arr.max()))


def _interval(node: Node, x_iv, y_iv, num_cap: list[int]) -> tuple[int, int, int]:
    """Exact (numerator_lo, numerator_hi, denominator) bounds for a node.

    Tracks the largest numerator magnitude seen anywhere in num_cap[0]; the
    vectorized path is only safe if that stays inside the int64 headroom.
    """
    if isinstance(node, Lit):
        lo, hi, den = node.value, node.value, 1
    elif isinstance(node, Var):
        lo, hi = x_iv[node.index - 1]
        den = 1
    elif isinstance(node, Param):
        lo, hi = y_iv[node.index - 1]
        den = 1
    elif isinstance(node, (Add, Sub)):
        l_lo, l_hi, l_den = _interval(node.left, x_iv, y_iv, num_cap)
        r_lo, r_hi, r_den = _interval(node.right, x_iv, y_iv, num_cap)
        den = lcm(l_den, r_den)
        lf, rf = den // l_den, den // r_den
        if isinstance(node, Add):
            lo, hi = l_lo * lf + r_lo * rf, l_hi * lf + r_hi * rf
        else:
            lo, hi = l_lo * lf - r_hi * rf, l_hi * lf - r_lo * rf
    elif isinstance(node, Mul):
        l_lo, l_hi, l_den = _interval(node.left, x_iv, y_iv, num_cap)
        r_lo, r_hi, r_den = _interval(node.right, x_iv, y_iv, num_cap)
        corners = [l_lo * r_lo, l_lo * r_hi, l_hi * r_lo, l_hi * r_hi]
        lo, hi, den = min(corners), max(corners), l_den * r_den
    elif isinstance(node, Pow):
        b_lo, b_hi, b_den = _interval(node.base, x_iv, y_iv, num_cap)
        corners = [b_lo**node.exponent, b_hi**node.exponent]
        if node.exponent % 2 == 0 and b_lo < 0 < b_hi:
            corners.append(0)
        lo, hi, den = min(corners), max(corners), b_den**node.exponent
    elif isinstance(node, Scale):
        n_lo, n_hi, n_den = _interval(node.node, x_iv, y_iv, num_cap)
        corners = [n_lo * node.num, n_hi * node.num]
        lo, hi, den = min(corners), max(corners), n_den * node.den
    else:
        raise TypeError(f"not an AST node: {node!r}")
    num_cap[0] = max(num_cap[0], abs(lo), abs(hi))
    return lo, hi, den


def value_bounds(node: Node, x_ranges, y_ranges) -> tuple[int, int]:
    """Conservative integer bounds of the rounded value over input boxes."""
    cap = [0]
    lo, hi, den = _interval(node, list(x_ranges), list(y_ranges), cap)
    return round_half_even(Fraction(lo, den)), round_half_even(Fraction(hi, den))


def _eval_vector(node: Node, xs, ys) -> tuple[np.ndarray, int]:
    """(numerator int64 array, denominator) pair for the fast path."""
    if isinstance(node, Lit):
        return np.int64(node.value), 1
    if isinstance(node, Var):
        return xs[node.index - 1], 1
    if isinstance(node, Param):
        return ys[node.index - 1], 1
    if isinstance(node, (Add, Sub)):
        l_num, l_den = _eval_vector(node.left, xs, ys)
        r_num, r_den = _eval_vector(node.right, xs, ys)
        den = lcm(l_den, r_den)
        left = l_num * np.int64(den // l_den)
        right = r_num * np.int64(den // r_den)
        return (left + right if isinstance(node, Add) else left - right), den
    if isinstance(node, Mul):
        l_num, l_den = _eval_vector(node.left, xs, ys)
        r_num, r_den = _eval_vector(node.right, xs, ys)
        return l_num * r_num, l_den * r_den
    if isinstance(node, Pow):
        b_num, b_den = _eval_vector(node.base, xs, ys)
        return b_num ** np.int64(node.exponent), b_den**node.exponent
    if isinstance(node, Scale):
        n_num, n_den = _eval_vector(node.node, xs, ys)
        return n_num * np.int64(node.num), n_den * node.den
    raise TypeError(f"not an AST node: {node!r}")


def _round_half_even_vector(num: np.ndarray, den: int) -> np.ndarray:
    if den == 1:
        return num
    d = np.int64(den)
    q = num // d
    twice = 2 * (num - q * d)
    q = q + ((twice > d) | ((twice == d) & (q % 2 != 0)))
    return q


def evaluate_on_grid(node: Node, xs=(), ys=()) -> np.ndarray:
    """Vectorized evaluate over broadcastable integer arrays.

    xs and ys are sequences of int scalars or int64 arrays; numpy broadcasting
    rules apply across all of them.  Falls back to exact per-point evaluation
    when interval analysis cannot guarantee the int64 fast path.
    """
    xs = [np.asarray(v, dtype=np.int64) for v in xs]
    ys = [np.asarray(v, dtype=np.int64) for v in ys]
    shape = np.broadcast_shapes(*(v.shape for v in xs), *(v.shape for v in ys))
    _count(int(np.prod(shape, dtype=np.int64)) if shape else 1)

    cap = [0]
    _interval(node, [_input_interval(v) for v in xs], [_input_interval(v) for v in ys], cap)
    if cap[0] < _VECTOR_SAFE_BOUND:
        num, den = _eval_vector(node, xs, ys)
        out = _round_half_even_vector(np.asarray(num), den)
        return np.broadcast_to(out, shape).astype(np.int64, copy=True)

    # exact fallback; raises per point if a value truly leaves the range
    bxs = [np.broadcast_to(v, shape) for v in xs]
    bys = [np.broadcast_to(v, shape) for v in ys]
    out = np.empty(shape, dtype=np.int64)
    for idx in np.ndindex(*shape):
        xv = [int(v[idx]) for v in bxs]
        yv = [int(v[idx]) for v in bys]
        out[idx] = _check_magnitude(round_half_even(_eval_exact(node, xv, yv)), node)
    return out
