"""Edit distance task over lowercase strings.

Cost convention: insert = delete = 2, replace = 3 (0 when the characters
already match).  Reasoning rounds are the rows i = 1..m of the DP matrix
restricted to columns j = 1..n (the all-boundary row and column are
implied), each row closed with a "," token.  The answer is the bottom-right
cell.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .vocab import LETTERS

INSERT_COST = 2
DELETE_COST = 2
REPLACE_COST = 3


def dp_matrix(a: str, b: str) -> list[list[int]]:
    """Full (m+1) x (n+1) table for transforming a into b."""
    m, n = len(a), len(b)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for j in range(1, n + 1):
        d[0][j] = j * INSERT_COST
    for i in range(1, m + 1):
        d[i][0] = i * DELETE_COST
        for j in range(1, n + 1):
            sub = 0 if a[i - 1] == b[j - 1] else REPLACE_COST
            d[i][j] = min(
                d[i - 1][j] + DELETE_COST,
                d[i][j - 1] + INSERT_COST,
                d[i - 1][j - 1] + sub,
            )
    return d


def dp_rounds(a: str, b: str) -> tuple[list[list[str]], str]:
    """Reasoning rounds (row tokens ending ",") and the answer token."""
    d = dp_matrix(a, b)
    n = len(b)
    rounds = [[str(v) for v in row[1 : n + 1]] + [","] for row in d[1:]]
    answer = str(d[len(a)][n])
    return rounds, answer


def distance_recursive(a: str, b: str) -> int:
    """Independent top-down recursion (answer oracle)."""

    @lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == 0:
            return j * INSERT_COST
        if j == 0:
            return i * DELETE_COST
        sub = 0 if a[i - 1] == b[j - 1] else REPLACE_COST
        return min(
            go(i - 1, j) + DELETE_COST,
            go(i, j - 1) + INSERT_COST,
            go(i - 1, j - 1) + sub,
        )

    return go(len(a), len(b))


def distance_exhaustive(a: str, b: str) -> int:
    """Brute force over every monotone alignment of a with b.

    Exponential; only for tiny strings in tests.
    """
    best = [len(a) * DELETE_COST + len(b) * INSERT_COST]

    def walk(i: int, j: int, cost: int) -> None:
        if cost >= best[0]:
            return
        if i == len(a) and j == len(b):
            best[0] = cost
            return
        if i < len(a):
            walk(i + 1, j, cost + DELETE_COST)
        if j < len(b):
            walk(i, j + 1, cost + INSERT_COST)
        if i < len(a) and j < len(b):
            sub = 0 if a[i] == b[j] else REPLACE_COST
            walk(i + 1, j + 1, cost + sub)

    walk(0, 0, 0)
    return best[0]


def generate_pair(short_len: int, long_len: int, rng: np.random.Generator) -> tuple[str, str]:
    """Random string pair; half the time the longer string is the shorter
    one with extra characters spliced in, so the pair shares a common
    subsequence and the answers stay non-degenerate."""
    if not 1 <= short_len <= long_len <= 45:
        raise ValueError(f"need 1 <= short ({short_len}) <= long ({long_len}) <= 45")
    short = "".join(LETTERS[i] for i in rng.integers(0, len(LETTERS), size=short_len))
    if rng.random() < 0.5:
        chars = list(short)
        for _ in range(long_len - short_len):
            pos = int(rng.integers(0, len(chars) + 1))
            chars.insert(pos, LETTERS[int(rng.integers(0, len(LETTERS)))])
        long = "".join(chars)
    else:
        long = "".join(LETTERS[i] for i in rng.integers(0, len(LETTERS), size=long_len))
    return short, long
