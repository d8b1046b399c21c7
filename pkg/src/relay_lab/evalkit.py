"""Metrics and report emission: final-answer accuracy by length, token-wise
bit accuracy of reasoning chains, per-position hit matrices for LIS, and
stable CSV output suitable for diffing and plotting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .armodel import ARModel, generate_batch
from .corpus.samples import Sample, TaskKind, oracle_answer, problem_length
from .looped import LoopedModel, decode_chain_batch
from .corpus.lis import GROUP


@dataclass
class EvalReport:
    """Accuracy rows plus optional hit matrices.

    rows: (model, task, length, metric, value, count); hit_matrices keyed
    by (model, task, length).
    """

    rows: list[tuple[str, str, int, str, float, int]] = field(default_factory=list)
    hit_matrices: dict[tuple[str, str, int], np.ndarray] = field(default_factory=dict)

    def add(self, model: str, task: TaskKind, length: int, metric: str, value: float, count: int) -> None:
        self.rows.append((model, task.value, length, metric, float(value), int(count)))

    def value(self, model: str, task: TaskKind, length: int, metric: str) -> float:
        for m, t, l, met, v, _ in self.rows:
            if (m, t, l, met) == (model, task.value, length, metric):
                return v
        raise KeyError((model, task.value, length, metric))


class ModelAdapter:
    """Answer-only view of a model for accuracy evaluation."""

    name = "adapter"

    def answers(self, problems: list[tuple[str, ...]], task: TaskKind) -> list[str]:
        raise NotImplementedError


class LoopedAdapter(ModelAdapter):
    def __init__(self, model: LoopedModel, name: str = "looped", batch_size: int = 512) -> None:
        self.model = model
        self.name = name
        self.batch_size = batch_size

    def answers(self, problems: list[tuple[str, ...]], task: TaskKind) -> list[str]:
        return [answer for _, answer, _ in self.chains(problems, task)]

    def chains(self, problems: list[tuple[str, ...]], task: TaskKind) -> list[tuple[list[list[str]], str, bool]]:
        groups: dict[int, list[int]] = {}
        for i, p in enumerate(problems):
            groups.setdefault(len(p), []).append(i)
        results: list[tuple[list[list[str]], str, bool]] = [None] * len(problems)  # type: ignore[list-item]
        for _, indices in sorted(groups.items()):
            for start in range(0, len(indices), self.batch_size):
                chunk = indices[start:start + self.batch_size]
                decoded = decode_chain_batch(self.model, task, [problems[i] for i in chunk])
                for i, out in zip(chunk, decoded):
                    results[i] = out
        return results


class ARAdapter(ModelAdapter):
    def __init__(self, model: ARModel, max_new: int, name: str = "ar", batch_size: int = 256) -> None:
        self.model = model
        self.max_new = max_new
        self.name = name
        self.batch_size = batch_size

    def answers(self, problems: list[tuple[str, ...]], task: TaskKind) -> list[str]:
        return [answer for _, answer, _, _ in self.chains(problems, task)]

    def chains(self, problems: list[tuple[str, ...]], task: TaskKind) -> list[tuple[list[list[str]], str, bool, list[str]]]:
        groups: dict[int, list[int]] = {}
        for i, p in enumerate(problems):
            groups.setdefault(len(p), []).append(i)
        results: list[tuple[list[list[str]], str, bool, list[str]]] = [None] * len(problems)  # type: ignore[list-item]
        with torch.no_grad():
            for _, indices in sorted(groups.items()):
                for start in range(0, len(indices), self.batch_size):
                    chunk = indices[start:start + self.batch_size]
                    out = generate_batch(self.model, [problems[i] for i in chunk], self.max_new)
                    for i, o in zip(chunk, out):
                        results[i] = o
        return results


class OracleAdapter(ModelAdapter):
    """Recomputes ground truth; the perfect reference model."""

    name = "oracle"

    def answers(self, problems: list[tuple[str, ...]], task: TaskKind) -> list[str]:
        dummy = [Sample(task=task, problem=p, rounds=((p[0],),), answer="0", complexity=1) for p in problems]
        return [oracle_answer(s) for s in dummy]


def final_accuracy(
    adapter: ModelAdapter,
    testsets: dict[int, list[Sample]],
    report: EvalReport | None = None,
) -> dict[int, tuple[float, int]]:
    """Exact-match accuracy of the final answer per length bucket."""
    out: dict[int, tuple[float, int]] = {}
    for length in sorted(testsets):
        samples = testsets[length]
        if not samples:
            print(f"warning: empty bucket at length {length}; omitted")
            continue
        task = samples[0].task
        predictions = adapter.answers([s.problem for s in samples], task)
        correct = sum(p == s.answer for p, s in zip(predictions, samples))
        accuracy = correct / len(samples)
        out[length] = (accuracy, len(samples))
        if report is not None:
            report.add(adapter.name, task, length, "final_accuracy", accuracy, len(samples))
    return out


def flatten_chain(rounds: list[list[str]] | tuple[tuple[str, ...], ...]) -> list[str]:
    return [tok for r in rounds for tok in r]


def bit_accuracy(predicted_rounds, oracle_rounds) -> float:
    """Token-wise match rate between two chains.

    Chains are flattened with their delimiters; positions are compared over
    the shorter length and divided by the longer, so length mismatches are
    penalized.  Symmetric in its arguments.
    """
    a = flatten_chain(predicted_rounds)
    b = flatten_chain(oracle_rounds)
    if not a and not b:
        return 1.0
    longer = max(len(a), len(b))
    matches = sum(x == y for x, y in zip(a, b))
    return matches / longer


def hit_matrix(
    predicted_chains: list[list[list[str]]],
    oracle_chains: list[list[list[str]]],
    length: int,
) -> np.ndarray:
    """Per-(round, position) match rates for LIS chains of one problem
    length; shape (T, 11) with T = ceil(length / 10)."""
    t_rounds = -(-length // GROUP)
    width = GROUP + 1
    for chain in oracle_chains:
        if len(chain) != t_rounds or any(len(r) != width for r in chain):
            raise ValueError(f"oracle chain shape mismatch for length {length}")
    hits = np.zeros((t_rounds, width), dtype=np.float64)
    for pred, oracle in zip(predicted_chains, oracle_chains):
        for t in range(t_rounds):
            pred_round = pred[t] if t < len(pred) else []
            for j in range(width):
                if j < len(pred_round) and pred_round[j] == oracle[t][j]:
                    hits[t, j] += 1
    return hits / max(1, len(oracle_chains))


def split_by_length(samples: list[Sample]) -> dict[int, list[Sample]]:
    out: dict[int, list[Sample]] = {}
    for s in samples:
        out.setdefault(problem_length(s), []).append(s)
    return dict(sorted(out.items()))


# --------------------------------------------------------------------------
# emission


def emit_report(report: EvalReport, out_dir: str | Path, figures: bool = False) -> list[Path]:
    """Write accuracy.csv, hit matrix CSVs and summary.txt (stable order);
    optionally render matplotlib figures next to them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    acc_path = out_dir / "accuracy.csv"
    with open(acc_path, "w") as f:
        f.write("model,task,length,metric,value,count\n")
        for row in sorted(report.rows):
            model, task, length, metric, value, count = row
            f.write(f"{model},{task},{length},{metric},{value:.6f},{count}\n")
    written.append(acc_path)

    for (model, task, length), matrix in sorted(report.hit_matrices.items()):
        name = f"hitmatrix_{task}_{length}.csv" if _single_matrix(report, task, length) \
            else f"hitmatrix_{task}_{length}__{model}.csv"
        path = out_dir / name
        with open(path, "w") as f:
            for row in matrix:
                f.write(",".join(f"{v:.6f}" for v in row) + "\n")
        written.append(path)

    summary = out_dir / "summary.txt"
    with open(summary, "w") as f:
        f.write("evaluation summary\n")
        f.write(f"rows: {len(report.rows)}\n")
        for model in sorted({r[0] for r in report.rows}):
            for task in sorted({r[1] for r in report.rows if r[0] == model}):
                rows = [r for r in report.rows if r[0] == model and r[1] == task and r[3] == "final_accuracy"]
                if rows:
                    mean = sum(r[4] for r in rows) / len(rows)
                    f.write(f"{model} {task}: mean final accuracy {mean:.4f} over {len(rows)} buckets\n")
    written.append(summary)

    if figures:
        from .plots import render_report_figures

        written.extend(render_report_figures(report, out_dir))
    return written


def _single_matrix(report: EvalReport, task: str, length: int) -> bool:
    return sum(1 for (_, t, l) in report.hit_matrices if (t, l) == (task, length)) == 1


def read_report(out_dir: str | Path) -> EvalReport:
    """Round-trip reader for emitted accuracy.csv and hit matrices."""
    out_dir = Path(out_dir)
    report = EvalReport()
    lines = (out_dir / "accuracy.csv").read_text().splitlines()
    for line in lines[1:]:
        model, task, length, metric, value, count = line.split(",")
        report.rows.append((model, task, int(length), metric, float(value), int(count)))
    for path in sorted(out_dir.glob("hitmatrix_*.csv")):
        stem = path.stem[len("hitmatrix_"):]
        if "__" in stem:
            rest, model = stem.split("__", 1)
        else:
            rest, model = stem, ""
        task, length = rest.rsplit("_", 1)
        matrix = np.array([[float(v) for v in line.split(",")] for line in path.read_text().splitlines()])
        report.hit_matrices[(model, task, int(length))] = matrix
    return report
