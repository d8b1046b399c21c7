"""Samples: one problem, its ordered reasoning rounds and one-token answer.

`complexity` fixes both the number of reasoning rounds and the loop
iteration count: operator count for arithmetic, shorter-string length for
edit distance, ceil(n/10) for LIS.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import arithmetic, edit_distance, lis
from .arithmetic import ParseError
from .vocab import LETTERS, SEP, TAG_ARI, TAG_ED, TAG_LIS, VOCAB


class TaskKind(enum.Enum):
    ARITHMETIC = "ARI"
    EDIT_DISTANCE = "ED"
    LIS = "LIS"

    @property
    def tag(self) -> str:
        return {"ARI": TAG_ARI, "ED": TAG_ED, "LIS": TAG_LIS}[self.value]

    @property
    def ordinal(self) -> int:
        return list(TaskKind).index(self)

    @classmethod
    def from_name(cls, name: str) -> "TaskKind":
        key = name.strip().upper().lstrip("[").rstrip("]")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown task {name!r}")


@dataclass(frozen=True)
class Sample:
    """One problem with its reasoning rounds and single-token answer.

    `malformed` marks model-generated chains whose rounds violated the
    decoding contract; it is never set on oracle-generated data and is not
    persisted to disk.
    """

    task: TaskKind
    problem: tuple[str, ...]
    rounds: tuple[tuple[str, ...], ...]
    answer: str
    complexity: int
    malformed: bool = False

    def with_chain(self, rounds: tuple[tuple[str, ...], ...], answer: str, malformed: bool) -> "Sample":
        return replace(self, rounds=rounds, answer=answer, malformed=malformed)


class ValidationError(ValueError):
    """A sample violates a task invariant."""


def _require_tag(problem: tuple[str, ...], task: TaskKind) -> None:
    if not problem:
        raise ParseError(0, "empty problem")
    if problem[0] != task.tag:
        raise ParseError(0, f"expected task tag {task.tag}, got {problem[0]!r}")


def _split_ed_body(problem: tuple[str, ...]) -> tuple[list[str], list[str]]:
    body = list(problem[1:])
    if not body or body[-1] != SEP:
        raise ParseError(len(problem) - 1, f"edit-distance problem must end with {SEP}")
    try:
        bar = body.index("|")
    except ValueError:
        raise ParseError(1, "missing '|' separator") from None
    a, b = body[:bar], body[bar + 1 : -1]
    for offset, part in ((1, a), (bar + 2, b)):
        for i, tok in enumerate(part):
            if tok not in LETTERS:
                raise ParseError(offset + i, f"expected a lowercase letter, got {tok!r}")
    if not a or not b:
        raise ParseError(1, "both strings must be non-empty")
    if len(a) > len(b):
        raise ParseError(1, "first string must be the shorter one")
    return a, b


def _split_lis_body(problem: tuple[str, ...]) -> list[int]:
    body = list(problem[1:])
    if not body or body[-1] != SEP:
        raise ParseError(len(problem) - 1, f"LIS problem must end with {SEP}")
    values = []
    for i, tok in enumerate(body[:-1]):
        if not tok.isdigit() or not 0 <= int(tok) <= 299:
            raise ParseError(1 + i, f"expected an integer in [0, 299], got {tok!r}")
        values.append(int(tok))
    if not values:
        raise ParseError(1, "empty value sequence")
    return values


def complexity(problem: tuple[str, ...] | list[str], task: TaskKind) -> int:
    """Round/iteration count implied by a well-formed problem."""
    problem = tuple(problem)
    _require_tag(problem, task)
    if task is TaskKind.ARITHMETIC:
        body = list(problem[1:])
        try:
            arithmetic.validate_body(body)
        except ParseError as e:
            raise ParseError(e.position + 1, str(e)) from None
        return arithmetic.count_operators(body)
    if task is TaskKind.EDIT_DISTANCE:
        a, _ = _split_ed_body(problem)
        return len(a)
    values = _split_lis_body(problem)
    return math.ceil(len(values) / lis.GROUP)


def make_arithmetic(num_operators: int, rng: np.random.Generator, max_body_len: int | None = None) -> Sample:
    body = arithmetic.generate_body(num_operators, rng, max_body_len=max_body_len)
    rounds, answer = arithmetic.reduction_rounds(body)
    return Sample(
        task=TaskKind.ARITHMETIC,
        problem=(TAG_ARI, *body),
        rounds=tuple(tuple(r) for r in rounds),
        answer=answer,
        complexity=num_operators,
    )


def make_edit_distance(short_len: int, long_len: int, rng: np.random.Generator) -> Sample:
    a, b = edit_distance.generate_pair(short_len, long_len, rng)
    rounds, answer = edit_distance.dp_rounds(a, b)
    return Sample(
        task=TaskKind.EDIT_DISTANCE,
        problem=(TAG_ED, *a, "|", *b, SEP),
        rounds=tuple(tuple(r) for r in rounds),
        answer=answer,
        complexity=short_len,
    )


def make_lis(n: int, rng: np.random.Generator) -> Sample:
    values = lis.generate_values(n, rng)
    rounds, answer = lis.dp_rounds(values)
    return Sample(
        task=TaskKind.LIS,
        problem=(TAG_LIS, *(str(v) for v in values), SEP),
        rounds=tuple(tuple(r) for r in rounds),
        answer=answer,
        complexity=math.ceil(n / lis.GROUP),
    )


def oracle_answer(sample: Sample) -> str:
    """Recompute the answer from the problem alone, via an algorithm
    independent of the generator's DP/reduction path."""
    if sample.task is TaskKind.ARITHMETIC:
        return str(arithmetic.evaluate_body(list(sample.problem[1:])))
    if sample.task is TaskKind.EDIT_DISTANCE:
        a, b = _split_ed_body(sample.problem)
        return str(edit_distance.distance_recursive("".join(a), "".join(b)))
    values = _split_lis_body(sample.problem)
    return str(lis.lis_length_patience(values))


def problem_length(sample: Sample) -> int:
    """Stratum key used in histograms and mixing plans: operator count for
    arithmetic, shorter-string length for ED, sequence length for LIS."""
    if sample.task is TaskKind.LIS:
        return len(sample.problem) - 2
    return sample.complexity


def validate_sample(sample: Sample) -> None:
    """Structural invariants; raises ValidationError on the first breach."""
    t = complexity(sample.problem, sample.task)
    if t != sample.complexity:
        raise ValidationError(f"complexity {sample.complexity} != computed {t}")
    if len(sample.rounds) != t:
        raise ValidationError(f"{len(sample.rounds)} rounds for complexity {t}")
    for r in sample.rounds:
        for tok in r:
            if tok not in VOCAB:
                raise ValidationError(f"round token {tok!r} not in vocabulary")
    if sample.task is TaskKind.ARITHMETIC:
        expected_ops = sample.complexity
        for i, r in enumerate(sample.rounds, start=1):
            ops = arithmetic.count_operators(r)
            if ops != expected_ops - i:
                raise ValidationError(f"round {i} has {ops} operators, expected {expected_ops - i}")
            if i < len(sample.rounds) and r[-1] != arithmetic.EQ:
                raise ValidationError(f"round {i} must end with '='")
        last = sample.rounds[-1]
        if len(last) != 1 or last[0] != sample.answer:
            raise ValidationError(f"final round {last} inconsistent with answer {sample.answer!r}")
    elif sample.task is TaskKind.EDIT_DISTANCE:
        _, b = _split_ed_body(sample.problem)
        for i, r in enumerate(sample.rounds, start=1):
            if len(r) != len(b) + 1 or r[-1] != ",":
                raise ValidationError(f"ED round {i} must be {len(b)} numbers plus ','")
            if not all(tok.isdigit() for tok in r[:-1]):
                raise ValidationError(f"ED round {i} contains a non-number")
        if sample.rounds[-1][-2] != sample.answer:
            raise ValidationError("final ED cell inconsistent with answer")
    else:
        for i, r in enumerate(sample.rounds, start=1):
            if len(r) != lis.GROUP + 1 or r[-1] != SEP:
                raise ValidationError(f"LIS round {i} must be {lis.GROUP} numbers plus {SEP}")
            if not all(tok.isdigit() for tok in r[:-1]):
                raise ValidationError(f"LIS round {i} contains a non-number")
        peak = max(int(tok) for r in sample.rounds for tok in r[:-1])
        if str(peak) != sample.answer:
            raise ValidationError(f"LIS answer {sample.answer!r} != max DP value {peak}")
