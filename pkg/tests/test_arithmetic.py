from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relay_lab.corpus import TaskKind, complexity, make_arithmetic, oracle_answer
from relay_lab.corpus.arithmetic import (
    DomainError,
    ParseError,
    count_operators,
    evaluate_body,
    generate_body,
    reduce_once,
    reduction_rounds,
    validate_body,
)

APPENDIX_EXPR = "( 6 + 9 ) ÷ ( 7 + 2 × 5 - 4 × 3 ) =".split()
APPENDIX_TRACE = [
    "15 ÷ ( 7 + 2 × 5 - 4 × 3 ) =",
    "15 ÷ ( 7 + 10 - 4 × 3 ) =",
    "15 ÷ ( 17 - 4 × 3 ) =",
    "15 ÷ ( 17 - 12 ) =",
    "15 ÷ 5 =",
]


def test_worked_example_reduction_trace() -> None:
    rounds, answer = reduction_rounds(APPENDIX_EXPR)
    assert [" ".join(r) for r in rounds[:5]] == APPENDIX_TRACE
    assert rounds[5] == ["3"]
    assert answer == "3"


def test_inline_example_rounds() -> None:
    rounds, answer = reduction_rounds("3 × 2 + 6 ÷ 3 =".split())
    assert [" ".join(r) for r in rounds] == ["6 + 6 ÷ 3 =", "6 + 2 =", "8"]
    assert answer == "8"


def test_single_operator_expression() -> None:
    rounds, answer = reduction_rounds("4 + 5 =".split())
    assert rounds == [["9"]]
    assert answer == "9"


def test_reduce_single_steps_match_worked_example() -> None:
    assert reduce_once("7 + 2 × 5 - 4 × 3".split()) == "7 + 10 - 4 × 3".split()
    assert reduce_once("7 + 10 - 4 × 3".split()) == "17 - 4 × 3".split()


def test_reduce_requires_an_operator() -> None:
    with pytest.raises(ParseError):
        reduce_once(["8"])


def test_reduce_rejects_out_of_range() -> None:
    with pytest.raises(DomainError):
        reduce_once("99 + 99".split())
    with pytest.raises(DomainError):
        reduce_once("7 ÷ 2".split())


def test_left_associativity() -> None:
    assert reduce_once("8 - 3 - 2".split()) == "5 - 2".split()
    assert reduce_once("8 ÷ 4 ÷ 2".split()) == "2 ÷ 2".split()


def test_complexity_counts_operators() -> None:
    problem = ["[ARI]"] + APPENDIX_EXPR
    assert complexity(problem, TaskKind.ARITHMETIC) == 6


def test_complexity_rejects_malformed_with_position() -> None:
    with pytest.raises(ParseError) as exc:
        complexity(["[ARI]", "3", "+", "="], TaskKind.ARITHMETIC)
    assert exc.value.position >= 0
    with pytest.raises(ParseError):
        complexity(["[ARI]", "(", "3", "=", ], TaskKind.ARITHMETIC)
    with pytest.raises(ParseError):
        complexity(["[ED]", "3", "+", "4", "="], TaskKind.ARITHMETIC)


def test_validate_body_flags_position() -> None:
    with pytest.raises(ParseError) as exc:
        validate_body("3 + + 4 =".split())
    assert exc.value.position == 2


@pytest.mark.parametrize("ops", [1, 2, 5, 8, 15, 30])
def test_generate_exact_operator_count(ops: int) -> None:
    rng = np.random.default_rng(ops)
    body = generate_body(ops, rng)
    assert count_operators(body) == ops
    validate_body(body)


def test_generate_bounds_check() -> None:
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        generate_body(0, rng)
    with pytest.raises(ValueError):
        generate_body(31, rng)


@given(st.integers(1, 10), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_reduction_chain_properties(ops: int, seed: int) -> None:
    """Every reduction removes exactly one operator, values stay in range,
    and the final round matches direct evaluation."""
    rng = np.random.default_rng(seed)
    body = generate_body(ops, rng)
    rounds, answer = reduction_rounds(body)
    assert len(rounds) == ops
    expected = evaluate_body(body)
    assert int(answer) == expected
    for i, r in enumerate(rounds, start=1):
        assert count_operators(r) == ops - i
        for tok in r:
            if tok.isdigit():
                assert 0 <= int(tok) <= 99


def test_sample_oracle_agreement_bulk() -> None:
    rng = np.random.default_rng(123)
    for _ in range(300):
        ops = int(rng.integers(1, 9))
        sample = make_arithmetic(ops, np.random.default_rng(rng.integers(2**32)))
        assert oracle_answer(sample) == sample.answer


def test_evaluate_rejects_fraction() -> None:
    with pytest.raises(DomainError):
        evaluate_body("7 ÷ 2 =".split())
