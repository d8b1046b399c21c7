"""Arithmetic expression task: generation, stepwise reduction, evaluation.

Expressions use +, -, multiplication and division signs over single-token
integers.  Every value that ever appears during reduction is an integer in
[0, 99]: the generator builds expression trees top-down from a target
value, so subtraction never goes negative and division is always exact.

One reasoning round performs exactly one reduction of the leftmost binary
operation whose operands are both literal numbers and whose right operand
is not claimed by an adjacent higher-precedence operator.  Parentheses
around a freshly reduced single number are stripped in the same step.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MUL = "×"
DIV = "÷"
EQ = "="

PRECEDENCE = {"+": 1, "-": 1, MUL: 2, DIV: 2}

VALUE_MIN = 0
VALUE_MAX = 99


class ParseError(ValueError):
    """Malformed expression; carries the offending token position."""

    def __init__(self, position: int, message: str) -> None:
        super().__init__(f"position {position}: {message}")
        self.position = position


class DomainError(ValueError):
    """A reduction produced a non-integer or out-of-range value."""


class GenerationError(RuntimeError):
    """Rejection sampling gave up; carries the attempt count."""

    def __init__(self, attempts: int) -> None:
        super().__init__(f"expression generation failed after {attempts} attempts")
        self.attempts = attempts


def is_number(token: str) -> bool:
    return token.isdigit()


@dataclass
class _Node:
    value: int
    op: str | None = None
    left: "_Node | None" = None
    right: "_Node | None" = None


def _split_ops(total: int, rng: np.random.Generator) -> tuple[int, int]:
    left = int(rng.integers(0, total + 1))
    return left, total - left


def _build_tree(value: int, num_ops: int, rng: np.random.Generator) -> _Node:
    """Expression tree evaluating to `value` with exactly `num_ops` operators."""
    if num_ops == 0:
        return _Node(value)
    candidates = ["+", "-", MUL]
    if value == 0 or VALUE_MAX // max(value, 1) >= 1:
        candidates.append(DIV)
    op = candidates[int(rng.integers(0, len(candidates)))]
    if op == "+":
        a = int(rng.integers(0, value + 1))
        b = value - a
    elif op == "-":
        a = int(rng.integers(value, VALUE_MAX + 1))
        b = a - value
    elif op == MUL:
        if value == 0:
            if rng.integers(0, 2) == 0:
                a, b = 0, int(rng.integers(0, VALUE_MAX + 1))
            else:
                a, b = int(rng.integers(0, VALUE_MAX + 1)), 0
        else:
            divisors = [d for d in range(1, value + 1) if value % d == 0]
            a = divisors[int(rng.integers(0, len(divisors)))]
            b = value // a
    else:  # exact division
        if value == 0:
            a, b = 0, int(rng.integers(1, VALUE_MAX + 1))
        else:
            b = int(rng.integers(1, VALUE_MAX // value + 1))
            a = value * b
    kl, kr = _split_ops(num_ops - 1, rng)
    return _Node(value, op, _build_tree(a, kl, rng), _build_tree(b, kr, rng))


def _render(node: _Node) -> list[str]:
    """Tokens for a tree; parenthesization makes the reduction order
    recover exactly the tree's pairings (right child of an operator is
    wrapped unless it binds strictly tighter)."""
    if node.op is None:
        return [str(node.value)]
    assert node.left is not None and node.right is not None
    prec = PRECEDENCE[node.op]
    left = _render(node.left)
    if node.left.op is not None and PRECEDENCE[node.left.op] < prec:
        left = ["(", *left, ")"]
    right = _render(node.right)
    if node.right.op is not None and PRECEDENCE[node.right.op] <= prec:
        right = ["(", *right, ")"]
    return [*left, node.op, *right]


def generate_body(
    num_operators: int,
    rng: np.random.Generator,
    max_body_len: int | None = None,
    max_attempts: int = 64,
) -> list[str]:
    """Expression tokens (with trailing "=") with exactly `num_operators`
    operators and all reduction intermediates integer in [0, 99]."""
    if not 1 <= num_operators <= 30:
        raise ValueError(f"num_operators must be in [1, 30], got {num_operators}")
    for _ in range(max_attempts):
        root_value = int(rng.integers(VALUE_MIN, VALUE_MAX + 1))
        tree = _build_tree(root_value, num_operators, rng)
        body = _render(tree) + [EQ]
        if max_body_len is None or len(body) <= max_body_len:
            return body
    raise GenerationError(max_attempts)


def count_operators(tokens: list[str] | tuple[str, ...]) -> int:
    return sum(1 for t in tokens if t in PRECEDENCE)


def validate_body(tokens: list[str] | tuple[str, ...]) -> None:
    """Grammar check for `expr =`; raises ParseError at the first bad token."""
    if not tokens or tokens[-1] != EQ:
        raise ParseError(len(tokens), "expression must end with '='")
    expr = tokens[:-1]
    if not expr:
        raise ParseError(0, "empty expression")
    depth = 0
    expect_operand = True
    for i, tok in enumerate(expr):
        if expect_operand:
            if tok == "(":
                depth += 1
            elif is_number(tok):
                expect_operand = False
            else:
                raise ParseError(i, f"expected number or '(', got {tok!r}")
        else:
            if tok == ")":
                depth -= 1
                if depth < 0:
                    raise ParseError(i, "unbalanced ')'")
            elif tok in PRECEDENCE:
                expect_operand = True
            else:
                raise ParseError(i, f"expected operator or ')', got {tok!r}")
    if expect_operand:
        raise ParseError(len(expr), "dangling operator")
    if depth != 0:
        raise ParseError(len(expr), "unbalanced '('")


def evaluate_body(tokens: list[str] | tuple[str, ...]) -> int:
    """Exact full-expression evaluation (independent of the reducer)."""
    validate_body(tokens)
    expr = list(tokens[:-1])
    pos = 0

    def parse_expr() -> Fraction:
        nonlocal pos
        val = parse_term()
        while pos < len(expr) and expr[pos] in ("+", "-"):
            op = expr[pos]
            pos += 1
            rhs = parse_term()
            val = val + rhs if op == "+" else val - rhs
        return val

    def parse_term() -> Fraction:
        nonlocal pos
        val = parse_factor()
        while pos < len(expr) and expr[pos] in (MUL, DIV):
            op = expr[pos]
            pos += 1
            rhs = parse_factor()
            val = val * rhs if op == MUL else val / rhs
        return val

    def parse_factor() -> Fraction:
        nonlocal pos
        tok = expr[pos]
        if tok == "(":
            pos += 1
            val = parse_expr()
            pos += 1  # closing paren guaranteed by validate_body
            return val
        pos += 1
        return Fraction(int(tok))

    result = parse_expr()
    if result.denominator != 1:
        raise DomainError(f"expression does not evaluate to an integer: {result}")
    return int(result)


def _strip_parens(tokens: list[str], idx: int) -> None:
    """Remove parens that directly enclose the single number at idx."""
    while 0 < idx < len(tokens) - 1 and tokens[idx - 1] == "(" and tokens[idx + 1] == ")":
        del tokens[idx + 1]
        del tokens[idx - 1]
        idx -= 1


def reduce_once(tokens: list[str] | tuple[str, ...]) -> list[str]:
    """One reduction step on a bare expression (no trailing "=")."""
    toks = list(tokens)
    if count_operators(toks) == 0:
        raise ParseError(0, "expression has no operator to reduce")
    for i, tok in enumerate(toks):
        if tok not in PRECEDENCE:
            continue
        if i == 0 or i == len(toks) - 1:
            continue
        if not (is_number(toks[i - 1]) and is_number(toks[i + 1])):
            continue
        nxt = toks[i + 2] if i + 2 < len(toks) else None
        if nxt in PRECEDENCE and PRECEDENCE[nxt] > PRECEDENCE[tok]:
            continue  # right operand claimed by a tighter-binding neighbor
        a, b = int(toks[i - 1]), int(toks[i + 1])
        if tok == "+":
            r = a + b
        elif tok == "-":
            r = a - b
        elif tok == MUL:
            r = a * b
        else:
            if b == 0 or a % b != 0:
                raise DomainError(f"inexact division {a} {DIV} {b}")
            r = a // b
        if not VALUE_MIN <= r <= VALUE_MAX:
            raise DomainError(f"value {r} outside [{VALUE_MIN}, {VALUE_MAX}]")
        toks[i - 1 : i + 2] = [str(r)]
        _strip_parens(toks, i - 1)
        return toks
    raise ParseError(0, "no reducible operation found")


def reduction_rounds(body: list[str] | tuple[str, ...]) -> tuple[list[list[str]], str]:
    """All reasoning rounds for `expr =` tokens.

    Rounds 1..T-1 are the successive reductions, each with a trailing "=";
    round T is the lone answer token.
    """
    expr = list(body[:-1])
    rounds: list[list[str]] = []
    while count_operators(expr) > 0:
        expr = reduce_once(expr)
        if count_operators(expr) > 0:
            rounds.append(expr + [EQ])
        else:
            rounds.append(list(expr))
    answer = rounds[-1][0]
    return rounds, answer
