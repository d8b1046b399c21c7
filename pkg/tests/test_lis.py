from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relay_lab.corpus import TaskKind, complexity, make_lis, oracle_answer
from relay_lab.corpus.lis import (
    dp_rounds,
    dp_values,
    generate_values,
    lis_length_exhaustive,
    lis_length_patience,
)

WORKED_INPUT = [103, 110, 145, 217, 233, 18, 30, 82, 141, 150, 159, 161, 167, 239]


def test_worked_example_rounds_and_answer() -> None:
    rounds, answer = dp_rounds(WORKED_INPUT)
    assert [" ".join(r) for r in rounds] == [
        "1 2 3 4 5 1 2 3 4 5 <sep>",
        "6 7 8 9 9 9 9 9 9 9 <sep>",
    ]
    assert answer == "9"


def test_strictly_decreasing_input() -> None:
    rounds, answer = dp_rounds(list(range(100, 90, -1)))
    assert [" ".join(r) for r in rounds] == ["1 1 1 1 1 1 1 1 1 1 <sep>"]
    assert answer == "1"


def test_padding_repeats_last_value() -> None:
    values = [5, 1, 7, 2, 9, 3, 11, 4, 13, 6, 20, 21]  # n=12
    d = dp_values(values)
    rounds, _ = dp_rounds(values)
    assert len(rounds) == 2
    assert rounds[1][:2] == [str(d[10]), str(d[11])]
    assert rounds[1][2:10] == [str(d[11])] * 8
    assert rounds[1][10] == "<sep>"


@given(st.lists(st.integers(0, 299), min_size=1, max_size=12))
@settings(max_examples=120, deadline=None)
def test_dp_matches_exhaustive(values: list[int]) -> None:
    d = dp_values(values)
    assert max(d) == lis_length_exhaustive(values)
    assert max(d) == lis_length_patience(values)


@given(st.lists(st.integers(0, 299), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_dp_recurrence_property(values: list[int]) -> None:
    d = dp_values(values)
    for i, v in enumerate(values):
        best = max([d[j] for j in range(i) if values[j] < v] + [0])
        assert d[i] == best + 1


def test_rounds_always_eleven_tokens() -> None:
    rng = np.random.default_rng(5)
    for n in (1, 9, 10, 11, 25, 130):
        sample = make_lis(n, np.random.default_rng(rng.integers(2**32)))
        for r in sample.rounds:
            assert len(r) == 11
            assert r[-1] == "<sep>"
        assert sample.complexity == -(-n // 10)


def test_generated_samples_agree_with_oracle() -> None:
    rng = np.random.default_rng(41)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        sample = make_lis(n, np.random.default_rng(rng.integers(2**32)))
        assert oracle_answer(sample) == sample.answer


def test_complexity_ceil_rule() -> None:
    problem = ("[LIS]", "7", "<sep>")
    assert complexity(problem, TaskKind.LIS) == 1
    fifteen = ("[LIS]", *[str(i) for i in range(15)], "<sep>")
    assert complexity(fifteen, TaskKind.LIS) == 2


def test_generate_values_bounds() -> None:
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        generate_values(0, rng)
    with pytest.raises(ValueError):
        generate_values(131, rng)
    values = generate_values(130, rng)
    assert len(values) == 130
    assert all(0 <= v <= 299 for v in values)
