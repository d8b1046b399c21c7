from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relay_lab.corpus import TaskKind, complexity, make_edit_distance, oracle_answer
from relay_lab.corpus.arithmetic import ParseError
from relay_lab.corpus.edit_distance import (
    DELETE_COST,
    INSERT_COST,
    REPLACE_COST,
    distance_exhaustive,
    distance_recursive,
    dp_matrix,
    dp_rounds,
    generate_pair,
)

# Worked example: one cell of the published matrix ("o" -> "ottml") is a
# typo there (7); four insertions at cost 2 give 8, which is what every
# consistent cost assignment yields.
GOLDEN_ROUNDS = [
    "0 2 4 6 8 ,",
    "2 0 2 4 6 ,",
    "4 2 3 2 4 ,",
    "6 4 5 4 2 ,",
]


def test_worked_example_matrix_and_answer() -> None:
    rounds, answer = dp_rounds("otml", "ottml")
    assert [" ".join(r) for r in rounds] == GOLDEN_ROUNDS
    assert answer == "2"


def test_identical_strings_cost_zero() -> None:
    assert distance_recursive("ab", "ab") == 0
    _, answer = dp_rounds("ab", "ab")
    assert answer == "0"


def test_single_insert_costs_two() -> None:
    assert distance_recursive("otml", "ottml") == INSERT_COST


def test_replace_plus_insert() -> None:
    # "x" -> "yz": replace + insert under the fixed cost convention
    assert distance_recursive("x", "yz") == REPLACE_COST + INSERT_COST == 5
    assert distance_exhaustive("x", "yz") == 5


def test_recursive_matches_exhaustive_small() -> None:
    rng = np.random.default_rng(7)
    letters = "abcd"
    for _ in range(60):
        a = "".join(rng.choice(list(letters), size=rng.integers(1, 6)))
        b = "".join(rng.choice(list(letters), size=rng.integers(1, 6)))
        assert distance_recursive(a, b) == distance_exhaustive(a, b)


@given(st.text("abcde", min_size=1, max_size=7), st.text("abcde", min_size=1, max_size=7))
@settings(max_examples=80, deadline=None)
def test_dp_matches_recursion(a: str, b: str) -> None:
    assert dp_matrix(a, b)[len(a)][len(b)] == distance_recursive(a, b)


@given(st.text("abcdefg", min_size=1, max_size=8), st.text("abcdefg", min_size=1, max_size=9))
@settings(max_examples=60, deadline=None)
def test_recurrence_invariant(a: str, b: str) -> None:
    d = dp_matrix(a, b)
    for j in range(len(b) + 1):
        assert d[0][j] == j * INSERT_COST
    for i in range(1, len(a) + 1):
        assert d[i][0] == i * DELETE_COST
        for j in range(1, len(b) + 1):
            sub = 0 if a[i - 1] == b[j - 1] else REPLACE_COST
            assert d[i][j] == min(
                d[i - 1][j] + DELETE_COST, d[i][j - 1] + INSERT_COST, d[i - 1][j - 1] + sub
            )


def test_rounds_have_long_string_numbers_plus_comma() -> None:
    rng = np.random.default_rng(3)
    sample = make_edit_distance(4, 7, rng)
    for r in sample.rounds:
        assert len(r) == 7 + 1
        assert r[-1] == ","
    assert len(sample.rounds) == 4


def test_generate_pair_validates_bounds() -> None:
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        generate_pair(5, 3, rng)
    with pytest.raises(ValueError):
        generate_pair(1, 46, rng)


def test_generated_samples_agree_with_oracle() -> None:
    rng = np.random.default_rng(99)
    for _ in range(200):
        m = int(rng.integers(1, 9))
        n = m + int(rng.integers(0, 4))
        sample = make_edit_distance(m, n, np.random.default_rng(rng.integers(2**32)))
        assert oracle_answer(sample) == sample.answer


def test_complexity_is_shorter_string_length() -> None:
    problem = ("[ED]", "o", "t", "m", "l", "|", "o", "t", "t", "m", "l", "<sep>")
    assert complexity(problem, TaskKind.EDIT_DISTANCE) == 4


def test_complexity_rejects_malformed() -> None:
    with pytest.raises(ParseError):
        complexity(("[ED]", "a", "b", "<sep>"), TaskKind.EDIT_DISTANCE)  # no bar
    with pytest.raises(ParseError):
        complexity(("[ED]", "a", "Z", "|", "a", "<sep>"), TaskKind.EDIT_DISTANCE)
    with pytest.raises(ParseError):
        complexity(("[ED]", "a", "b", "c", "|", "a", "<sep>"), TaskKind.EDIT_DISTANCE)  # first longer
