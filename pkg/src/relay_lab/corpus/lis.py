"""Longest strictly increasing subsequence task.

The DP values d_i (length of the longest strictly increasing subsequence
ending at position i) are folded into groups of 10 per reasoning round;
a short final group repeats its last value until it holds 10 numbers.
Each round is closed with a "<sep>" token.  The answer is max(d).
"""

from __future__ import annotations

from bisect import bisect_left

import numpy as np

from .vocab import MAX_NUMBER, SEP

GROUP = 10

VALUE_LO = 0
VALUE_HI = MAX_NUMBER


def dp_values(values: list[int] | tuple[int, ...]) -> list[int]:
    """O(n^2) prefix DP: d[i] = 1 + max(d[j] for j < i with v[j] < v[i])."""
    d: list[int] = []
    for i, v in enumerate(values):
        best = 0
        for j in range(i):
            if values[j] < v and d[j] > best:
                best = d[j]
        d.append(best + 1)
    return d


def lis_length_patience(values: list[int] | tuple[int, ...]) -> int:
    """Independent answer oracle via patience sorting (strict increase)."""
    tails: list[int] = []
    for v in values:
        pos = bisect_left(tails, v)
        if pos == len(tails):
            tails.append(v)
        else:
            tails[pos] = v
    return len(tails)


def lis_length_exhaustive(values: list[int] | tuple[int, ...]) -> int:
    """Brute force over all subsequences; only for n <= ~15."""
    n = len(values)
    best = 0
    for mask in range(1, 1 << n):
        last = -1
        length = 0
        ok = True
        for i in range(n):
            if mask >> i & 1:
                if values[i] <= last:
                    ok = False
                    break
                last = values[i]
                length += 1
        if ok and length > best:
            best = length
    return best


def dp_rounds(values: list[int] | tuple[int, ...]) -> tuple[list[list[str]], str]:
    """Reasoning rounds (groups of 10 DP values plus "<sep>") and answer."""
    d = dp_values(values)
    rounds: list[list[str]] = []
    for start in range(0, len(d), GROUP):
        group = d[start : start + GROUP]
        group = group + [group[-1]] * (GROUP - len(group))
        rounds.append([str(v) for v in group] + [SEP])
    answer = str(max(d))
    return rounds, answer


def generate_values(n: int, rng: np.random.Generator) -> list[int]:
    """Random input sequence; half the time built from a few increasing
    runs (the structured regime), otherwise i.i.d. uniform."""
    if not 1 <= n <= 130:
        raise ValueError(f"n must be in [1, 130], got {n}")
    if rng.random() < 0.5:
        return [int(v) for v in rng.integers(VALUE_LO, VALUE_HI + 1, size=n)]
    runs = int(rng.integers(1, 5))
    cuts = sorted(rng.choice(np.arange(1, n), size=min(runs - 1, n - 1), replace=False).tolist()) if n > 1 else []
    bounds = [0, *cuts, n]
    values: list[int] = []
    for lo, hi in zip(bounds, bounds[1:]):
        length = hi - lo
        run = np.sort(rng.choice(np.arange(VALUE_LO, VALUE_HI + 1), size=length, replace=False))
        values.extend(int(v) for v in run)
    return values
