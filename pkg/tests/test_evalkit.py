from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relay_lab.corpus import Sample, TaskKind, make_lis
from relay_lab.evalkit import (
    EvalReport,
    ModelAdapter,
    OracleAdapter,
    bit_accuracy,
    emit_report,
    final_accuracy,
    hit_matrix,
    read_report,
    split_by_length,
)


def _lis_testsets(lengths: list[int], per_bucket: int) -> dict[int, list[Sample]]:
    out = {}
    for n in lengths:
        out[n] = [make_lis(n, np.random.default_rng((n, i))) for i in range(per_bucket)]
    return out


def test_oracle_as_model_scores_one_everywhere() -> None:
    testsets = _lis_testsets([5, 12], per_bucket=20)
    report = EvalReport()
    accuracy = final_accuracy(OracleAdapter(), testsets, report)
    assert all(acc == 1.0 for acc, _ in accuracy.values())
    assert report.value("oracle", TaskKind.LIS, 5, "final_accuracy") == 1.0


class _ConstantAdapter(ModelAdapter):
    name = "constant"

    def __init__(self, answer: str) -> None:
        self.answer = answer

    def answers(self, problems, task):
        return [self.answer] * len(problems)


def test_constant_model_on_balanced_answers() -> None:
    """10 equiprobable answers -> accuracy ~= 0.1 within 3 sigma."""
    rng = np.random.default_rng(0)
    n = 400
    samples = []
    for i in range(n):
        answer = str(rng.integers(0, 10))
        samples.append(Sample(
            task=TaskKind.LIS,
            problem=("[LIS]", str(i % 300), "<sep>"),
            rounds=(("1",) * 10 + ("<sep>",),),
            answer=answer,
            complexity=1,
        ))
    accuracy = final_accuracy(_ConstantAdapter("3"), {1: samples})
    acc, count = accuracy[1]
    sigma = math.sqrt(0.1 * 0.9 / n)
    assert abs(acc - 0.1) <= 3 * sigma
    assert count == n


def test_empty_bucket_omitted_with_warning(capsys) -> None:
    accuracy = final_accuracy(OracleAdapter(), {4: []})
    assert accuracy == {}
    assert "empty bucket" in capsys.readouterr().out


def test_bit_accuracy_identical_chains() -> None:
    chain = [["1", "2", "<sep>"], ["3", "<sep>"]]
    assert bit_accuracy(chain, chain) == 1.0


def test_bit_accuracy_single_token_difference() -> None:
    a = [[str(i) for i in range(20)]]
    b = [[str(i) for i in range(19)] + ["x"]]
    assert bit_accuracy(a, b) == pytest.approx(0.95)


def test_bit_accuracy_length_mismatch_penalized() -> None:
    a = [["1", "2", "3", "4"]]
    b = [["1", "2"]]
    assert bit_accuracy(a, b) == pytest.approx(0.5)


@given(
    st.lists(st.lists(st.sampled_from(["1", "2", "<sep>"]), min_size=1, max_size=5), min_size=1, max_size=4),
    st.lists(st.lists(st.sampled_from(["1", "2", "<sep>"]), min_size=1, max_size=5), min_size=1, max_size=4),
)
@settings(max_examples=60, deadline=None)
def test_bit_accuracy_symmetric(a, b) -> None:
    assert bit_accuracy(a, b) == pytest.approx(bit_accuracy(b, a))
    assert 0.0 <= bit_accuracy(a, b) <= 1.0


def test_hit_matrix_perfect_chains_all_ones() -> None:
    samples = [make_lis(25, np.random.default_rng(i)) for i in range(10)]
    chains = [[list(r) for r in s.rounds] for s in samples]
    matrix = hit_matrix(chains, chains, length=25)
    assert matrix.shape == (3, 11)
    assert np.all(matrix == 1.0)


def test_hit_matrix_shape_for_length_105() -> None:
    samples = [make_lis(105, np.random.default_rng(i)) for i in range(4)]
    chains = [[list(r) for r in s.rounds] for s in samples]
    assert hit_matrix(chains, chains, length=105).shape == (11, 11)


def test_hit_matrix_rejects_mixed_lengths() -> None:
    a = make_lis(25, np.random.default_rng(0))
    b = make_lis(35, np.random.default_rng(1))
    chains = [[list(r) for r in s.rounds] for s in (a, b)]
    with pytest.raises(ValueError):
        hit_matrix(chains, chains, length=25)


def test_hit_matrix_counts_partial_matches() -> None:
    samples = [make_lis(15, np.random.default_rng(i)) for i in range(2)]
    oracle = [[list(r) for r in s.rounds] for s in samples]
    predicted = [[list(r) for r in c] for c in oracle]
    predicted[0][1][3] = "999" if predicted[0][1][3] != "999" else "998"
    matrix = hit_matrix(predicted, oracle, length=15)
    assert matrix[1, 3] == pytest.approx(0.5)


def test_emit_and_read_report_round_trip(tmp_path: Path) -> None:
    report = EvalReport()
    report.add("m1", TaskKind.LIS, 10, "final_accuracy", 0.75, 100)
    report.add("m1", TaskKind.LIS, 12, "final_accuracy", 0.5, 100)
    report.add("m2", TaskKind.ARITHMETIC, 5, "bit_accuracy", 0.9, 40)
    report.hit_matrices[("m1", "LIS", 10)] = np.eye(1, 11) * 0.5 + 0.25
    written = emit_report(report, tmp_path, figures=False)
    names = {p.name for p in written}
    assert "accuracy.csv" in names and "summary.txt" in names
    assert "hitmatrix_LIS_10.csv" in names
    back = read_report(tmp_path)
    assert sorted(back.rows) == sorted(report.rows)
    key = ("", "LIS", 10)
    assert np.allclose(back.hit_matrices[key], report.hit_matrices[("m1", "LIS", 10)])


def test_emit_report_stable_ordering(tmp_path: Path) -> None:
    r1, r2 = EvalReport(), EvalReport()
    rows = [
        ("b", "LIS", 9, "final_accuracy", 0.5, 10),
        ("a", "ARI", 3, "final_accuracy", 0.25, 10),
    ]
    r1.rows = list(rows)
    r2.rows = list(reversed(rows))
    emit_report(r1, tmp_path / "one", figures=False)
    emit_report(r2, tmp_path / "two", figures=False)
    assert (tmp_path / "one" / "accuracy.csv").read_text() == (tmp_path / "two" / "accuracy.csv").read_text()


def test_empty_report_header_only(tmp_path: Path) -> None:
    emit_report(EvalReport(), tmp_path, figures=False)
    assert (tmp_path / "accuracy.csv").read_text() == "model,task,length,metric,value,count\n"


def test_figures_rendered(tmp_path: Path) -> None:
    report = EvalReport()
    for length, acc in [(3, 1.0), (4, 0.9), (5, 0.6)]:
        report.add("m1", TaskKind.ARITHMETIC, length, "final_accuracy", acc, 50)
    report.hit_matrices[("m1", "LIS", 15)] = np.full((2, 11), 0.8)
    written = emit_report(report, tmp_path, figures=True)
    names = {p.name for p in written}
    assert "accuracy_ARI.png" in names
    assert "hitmatrix_LIS_15__m1.png" in names
    for p in written:
        assert p.exists() and p.stat().st_size > 0


def test_split_by_length() -> None:
    samples = [make_lis(n, np.random.default_rng(n)) for n in (4, 4, 12)]
    split = split_by_length(samples)
    assert sorted(split) == [4, 12]
    assert len(split[4]) == 2
