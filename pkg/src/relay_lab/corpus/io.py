"""Dataset container and its bit-exact on-disk text format.

Layout::

    RELAYDS v1 task=ARI seed=7 count=2
    P [ARI] 4 + 5 =
    R 9
    A 9
    ...
    END <fnv1a64 of the sample lines, lowercase hex>

Reads are strict by default (task invariants enforced); model-generated
datasets, whose chains may be malformed, are read with ``strict=False``
which still verifies schema, vocabulary membership and the checksum.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import rng as rng_mod
from .samples import Sample, TaskKind, ValidationError, complexity, make_arithmetic, make_edit_distance, make_lis, problem_length, validate_sample
from .vocab import VOCAB

MAGIC = "RELAYDS v1"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


class FormatError(ValueError):
    """Schema or checksum violation; carries the 1-based line number."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class Dataset:
    task: TaskKind
    seed: int
    samples: list[Sample] = field(default_factory=list)

    @property
    def length_histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(problem_length(s) for s in self.samples).items()))

    def __len__(self) -> int:
        return len(self.samples)


def _sample_lines(sample: Sample) -> list[str]:
    rounds = " // ".join(" ".join(r) for r in sample.rounds)
    return [
        "P " + " ".join(sample.problem),
        "R " + rounds,
        "A " + sample.answer,
    ]


def dataset_write(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    body_lines: list[str] = []
    for sample in dataset.samples:
        body_lines.extend(_sample_lines(sample))
    body = "".join(line + "\n" for line in body_lines)
    header = f"{MAGIC} task={dataset.task.value} seed={dataset.seed} count={len(dataset.samples)}\n"
    checksum = fnv1a64(body.encode("utf-8"))
    path.write_text(header + body + f"END {checksum:016x}\n", encoding="utf-8")


_HEADER_RE = re.compile(
    rf"^{re.escape(MAGIC)} task=(ARI|ED|LIS) seed=(\d+) count=(\d+)$"
)


def dataset_read(path: str | Path, strict: bool = True) -> Dataset:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(1, "empty file")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise FormatError(1, f"bad header: {lines[0]!r}")
    task = TaskKind.from_name(m.group(1))
    seed = int(m.group(2))
    count = int(m.group(3))
    expected_lines = 1 + 3 * count + 1
    if len(lines) != expected_lines:
        raise FormatError(len(lines), f"expected {expected_lines} lines, found {len(lines)}")
    end_line = lines[-1]
    if not end_line.startswith("END "):
        raise FormatError(len(lines), f"missing END trailer: {end_line!r}")
    body = "".join(line + "\n" for line in lines[1:-1])
    checksum = fnv1a64(body.encode("utf-8"))
    stated = end_line[4:].strip()
    if f"{checksum:016x}" != stated:
        raise FormatError(len(lines), f"checksum mismatch: body={checksum:016x} stated={stated}")

    samples: list[Sample] = []
    for i in range(count):
        base = 1 + 3 * i
        p_line, r_line, a_line = lines[base], lines[base + 1], lines[base + 2]
        for line_no, line, prefix in ((base + 1, p_line, "P "), (base + 2, r_line, "R "), (base + 3, a_line, "A ")):
            if not line.startswith(prefix):
                raise FormatError(line_no, f"expected {prefix!r} record, got {line!r}")
        problem = tuple(p_line[2:].split())
        rounds = tuple(tuple(part.split()) for part in r_line[2:].split(" // "))
        answer = a_line[2:].strip()
        for line_no, tokens in ((base + 1, problem), (base + 3, (answer,))):
            for tok in tokens:
                if tok not in VOCAB:
                    raise FormatError(line_no, f"unknown token {tok!r}")
        for tok in (t for r in rounds for t in r):
            if tok not in VOCAB:
                raise FormatError(base + 2, f"unknown token {tok!r}")
        try:
            c = complexity(problem, task)
        except ValueError as e:
            raise FormatError(base + 1, f"malformed problem: {e}") from None
        sample = Sample(task=task, problem=problem, rounds=rounds, answer=answer, complexity=c)
        if strict:
            try:
                validate_sample(sample)
            except ValidationError as e:
                raise FormatError(base + 2, f"invariant violation: {e}") from None
        samples.append(sample)
    return Dataset(task=task, seed=seed, samples=samples)


def expand_histogram(histogram: dict[int, int]) -> list[int]:
    """Flatten {length: count} into a per-index length list (sorted)."""
    lengths: list[int] = []
    for length in sorted(histogram):
        n = histogram[length]
        if n < 0:
            raise ValueError(f"negative count for length {length}")
        lengths.extend([length] * n)
    return lengths


def generate_sample(task: TaskKind, length: int, seed: int, namespace: int, index: int) -> Sample:
    """One sample from its own deterministic stream; pure in all arguments."""
    rng = rng_mod.sample_rng(seed, task.ordinal, namespace, index)
    if task is TaskKind.ARITHMETIC:
        return make_arithmetic(length, rng)
    if task is TaskKind.EDIT_DISTANCE:
        extra = int(rng.integers(0, min(5, 45 - length) + 1))
        return make_edit_distance(length, length + extra, rng)
    return make_lis(length, rng)


def build_dataset(
    task: TaskKind,
    histogram: dict[int, int],
    seed: int,
    namespace: int = rng_mod.NS_TRAIN,
) -> Dataset:
    """Seeded, length-stratified dataset; byte-identical under regeneration."""
    lengths = expand_histogram(histogram)
    samples = [
        generate_sample(task, length, seed, namespace, index)
        for index, length in enumerate(lengths)
    ]
    return Dataset(task=task, seed=seed, samples=samples)
