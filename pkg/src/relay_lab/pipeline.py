"""Distillation pipeline: generate reasoning chains with the aligned looped
model for problems beyond the training range, merge them with original
data under a stratified mixing plan, and fine-tune the auto-regressive
model; plus the phased self-generation baseline with answer filtering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .armodel import ARModel, default_max_new, encode_chain
from .corpus.io import Dataset, generate_sample
from .corpus.rng import NS_RELAY, NS_SELFGEN
from .corpus.samples import Sample, TaskKind, oracle_answer, problem_length
from .evalkit import ARAdapter, LoopedAdapter
from .looped import LoopedModel, generated_sample
from .training import TrainHyper, Trainer, clone_model


class MergeError(ValueError):
    """A mixing-plan stratum cannot be filled; names the stratum."""


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class TaskMixingPlan:
    """Counts for one task's merged dataset: the in-range stratum plus one
    stratum per extended length."""

    original: int
    ladder: dict[int, int]

    def total(self) -> int:
        return self.original + sum(self.ladder.values())

    def scaled(self, divisor: int) -> "TaskMixingPlan":
        return TaskMixingPlan(
            original=round_half_up(self.original / divisor),
            ladder={k: round_half_up(v / divisor) for k, v in self.ladder.items()},
        )


# Published merged-dataset composition (100k per task at full scale).
FULL_MIXING_PLANS: dict[str, TaskMixingPlan] = {
    "ARI": TaskMixingPlan(
        original=42515,
        ladder={16: 6477, 17: 6882, 18: 7287, 19: 6477, 20: 6072,
                21: 5668, 22: 5263, 23: 4858, 24: 4453, 25: 4048},
    ),
    "ED": TaskMixingPlan(
        original=60844,
        ladder={31: 4195, 32: 4195, 33: 4055, 34: 4055, 35: 3916,
                36: 3916, 37: 3776, 38: 3776, 39: 3636, 40: 3636},
    ),
    "LIS": TaskMixingPlan(
        original=73235,
        ladder={100 + i: c for i, c in enumerate(
            [1479, 1464, 1449, 1434, 1420, 1405, 1390, 1375, 1360, 1346,
             1331, 1316, 1301, 1286, 1272, 1257, 1242, 1227, 1213, 1198], start=1)},
    ),
}


@dataclass
class Phase:
    length_offset: int           # target length = train_max + offset
    caps: dict[str, int]         # per task value


@dataclass
class PhaseSchedule:
    """Five-phase self-generation schedule: +1 length per phase, per-phase
    generation caps, fixed fine-tune budget."""

    phases: list[Phase]
    epochs_per_phase: int = 100
    lr: float = 5e-5

    def scaled(self, divisor: int) -> "PhaseSchedule":
        return PhaseSchedule(
            phases=[
                Phase(p.length_offset, {k: round_half_up(v / divisor) for k, v in p.caps.items()})
                for p in self.phases
            ],
            epochs_per_phase=max(1, round_half_up(self.epochs_per_phase / divisor)),
            lr=self.lr,
        )


FULL_PHASE_SCHEDULE = PhaseSchedule(
    phases=[
        Phase(1, {"ARI": 15000, "ED": 15000, "LIS": 15000}),
        Phase(2, {"ARI": 10000, "ED": 10000, "LIS": 10000}),
        Phase(3, {"ARI": 7500, "ED": 7500, "LIS": 7500}),
        Phase(4, {"ARI": 6000, "ED": 3000, "LIS": 3000}),
        Phase(5, {"ARI": 5000, "ED": 3000, "LIS": 3000}),
    ],
)


# --------------------------------------------------------------------------
# text configs (key=value; strata as task.length=count)


def write_mixing_plan(plans: dict[str, TaskMixingPlan], path: str | Path) -> None:
    lines = []
    for task in sorted(plans):
        plan = plans[task]
        lines.append(f"{task.lower()}.original={plan.original}")
        for length in sorted(plan.ladder):
            lines.append(f"{task.lower()}.{length}={plan.ladder[length]}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mixing_plan(path: str | Path) -> dict[str, TaskMixingPlan]:
    plans: dict[str, TaskMixingPlan] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ValueError(f"line {line_no}: expected task.stratum key, got {key!r}")
        task = TaskKind.from_name(parts[0]).value
        plan = plans.setdefault(task, TaskMixingPlan(original=0, ladder={}))
        if parts[1] == "original":
            plan.original = int(value)
        else:
            plan.ladder[int(parts[1])] = int(value)
    return plans


def write_phase_schedule(schedule: PhaseSchedule, path: str | Path) -> None:
    lines = [f"epochs_per_phase={schedule.epochs_per_phase}", f"lr={schedule.lr}"]
    for i, phase in enumerate(schedule.phases, start=1):
        lines.append(f"phase{i}.offset={phase.length_offset}")
        for task in sorted(phase.caps):
            lines.append(f"phase{i}.{task.lower()}={phase.caps[task]}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_phase_schedule(path: str | Path) -> PhaseSchedule:
    epochs, lr = 100, 5e-5
    phases: dict[int, Phase] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, value = line.split("=", 1)
        if key == "epochs_per_phase":
            epochs = int(value)
        elif key == "lr":
            lr = float(value)
        elif key.startswith("phase"):
            name, sub = key.split(".", 1)
            idx = int(name[len("phase"):])
            phase = phases.setdefault(idx, Phase(idx, {}))
            if sub == "offset":
                phase.length_offset = int(value)
            else:
                phase.caps[TaskKind.from_name(sub).value] = int(value)
        else:
            raise ValueError(f"line {line_no}: unknown key {key!r}")
    return PhaseSchedule(phases=[phases[i] for i in sorted(phases)], epochs_per_phase=epochs, lr=lr)


# --------------------------------------------------------------------------
# stage II: generation, merge, fine-tune


@dataclass
class GenerationStats:
    requested: int = 0
    produced: int = 0
    malformed: int = 0


def relay_generate(
    looped_model: LoopedModel,
    task: TaskKind,
    counts: dict[int, int],
    seed: int,
    drop_malformed: bool = False,
    namespace: int = NS_RELAY,
    index_base: int = 0,
) -> tuple[Dataset, GenerationStats]:
    """Chains for fresh problems at the requested lengths, decoded from the
    looped model.  No answer filtering; malformed chains are counted and
    kept unless `drop_malformed`."""
    stats = GenerationStats(requested=sum(counts.values()))
    problems: list[tuple[str, ...]] = []
    index = index_base
    for length in sorted(counts):
        for _ in range(counts[length]):
            problems.append(generate_sample(task, length, seed, namespace, index).problem)
            index += 1
    adapter = LoopedAdapter(looped_model)
    samples: list[Sample] = []
    if problems:
        for problem, (rounds, answer, malformed) in zip(problems, adapter.chains(problems, task)):
            stats.malformed += int(malformed)
            if malformed and drop_malformed:
                continue
            samples.append(generated_sample(task, problem, rounds, answer, malformed))
    stats.produced = len(samples)
    return Dataset(task=task, seed=seed, samples=samples), stats


def merge(
    original: Dataset,
    generated: Dataset,
    plan: TaskMixingPlan,
    seed: int,
) -> tuple[Dataset, list[tuple[str, str, int, int]]]:
    """Stratified subsample without replacement, deduplicated by problem,
    shuffled; returns the merged dataset and the realized-count manifest
    rows (task, stratum, requested, realized)."""
    if original.task is not generated.task:
        raise MergeError("original and generated datasets belong to different tasks")
    task = original.task
    rng = np.random.default_rng((seed, task.ordinal))
    taken: set[tuple[str, ...]] = set()
    merged: list[Sample] = []
    manifest: list[tuple[str, str, int, int]] = []

    def draw(pool: list[Sample], want: int, stratum: str) -> None:
        order = rng.permutation(len(pool))
        got = 0
        for i in order:
            if got == want:
                break
            s = pool[i]
            if s.problem in taken:
                continue
            taken.add(s.problem)
            merged.append(s)
            got += 1
        if got < want:
            raise MergeError(
                f"stratum {task.value}.{stratum}: need {want} unique samples, found {got}"
            )
        manifest.append((task.value, stratum, want, got))

    draw(original.samples, plan.original, "original")
    by_length: dict[int, list[Sample]] = {}
    for s in generated.samples:
        by_length.setdefault(problem_length(s), []).append(s)
    for length in sorted(plan.ladder):
        draw(by_length.get(length, []), plan.ladder[length], str(length))

    final_order = rng.permutation(len(merged))
    return Dataset(task=task, seed=seed, samples=[merged[i] for i in final_order]), manifest


def write_manifest(manifest: list[tuple[str, str, int, int]], path: str | Path) -> None:
    with open(path, "w") as f:
        f.write("task,stratum,requested,realized\n")
        for task, stratum, requested, realized in manifest:
            f.write(f"{task},{stratum},{requested},{realized}\n")


def finetune(
    ar_model: ARModel,
    samples: list[Sample],
    hyper: TrainHyper,
    out_dir: str | Path,
    eval_samples: list[Sample] | None = None,
) -> ARModel:
    """Fine-tune a copy of the model (architecture untouched) on `samples`."""
    tuned = clone_model(ar_model)
    if hyper.epochs <= 0:
        return tuned
    trainer = Trainer(tuned, samples, hyper, out_dir, eval_samples=eval_samples)
    trainer.run(resume=True, quiet=True)
    return tuned


# --------------------------------------------------------------------------
# self-generation baseline (answer-filtered phased fine-tuning)


@dataclass
class PhaseResult:
    phase: int
    lengths: dict[str, int]
    attempted: int
    accepted: int
    acceptance_rate: float
    skipped: bool = False


@dataclass
class SelfGenResult:
    model: ARModel
    phase_datasets: list[list[Sample]] = field(default_factory=list)
    phase_stats: list[PhaseResult] = field(default_factory=list)


def self_generate_baseline(
    ar_model: ARModel,
    verifier: str,
    schedule: PhaseSchedule,
    base_samples: list[Sample],
    train_max: dict[str, int],
    total_per_task: dict[str, int],
    seed: int,
    out_dir: str | Path,
    looped_model: LoopedModel | None = None,
    attempt_factor: int = 2,
    hyper_template: TrainHyper | None = None,
    max_new: int | None = None,
) -> SelfGenResult:
    """Phased self-training: generate chains at +offset lengths with the
    current model, keep those whose final answer the verifier confirms
    (up to the phase cap), refill to the fixed total with prior data, and
    fine-tune.  verifier is "looped" or "ground_truth"."""
    if verifier not in ("looped", "ground_truth"):
        raise ValueError(f"unknown verifier {verifier!r}")
    if verifier == "looped" and looped_model is None:
        raise ValueError("verifier='looped' needs a looped model")
    out_dir = Path(out_dir)
    tasks = sorted({s.task for s in base_samples}, key=lambda t: t.ordinal)
    if max_new is None:
        max_new = default_max_new(max(len(encode_chain(s).tokens) for s in base_samples))
    current_model = clone_model(ar_model)
    rng = np.random.default_rng((seed, 17))
    current_data: list[Sample] = list(base_samples)
    result = SelfGenResult(model=current_model)

    for phase_no, phase in enumerate(schedule.phases, start=1):
        accepted: list[Sample] = []
        attempted = 0
        lengths_used: dict[str, int] = {}
        for task in tasks:
            cap = phase.caps.get(task.value, 0)
            if cap <= 0:
                continue
            length = train_max[task.value] + phase.length_offset
            lengths_used[task.value] = length
            budget = cap * attempt_factor
            index_base = phase_no * 1_000_000
            problems = [
                generate_sample(task, length, seed, NS_SELFGEN, index_base + i).problem
                for i in range(budget)
            ]
            attempted += len(problems)
            adapter = ARAdapter(current_model, max_new=max_new)
            chains = adapter.chains(problems, task)
            if verifier == "looped":
                references = LoopedAdapter(looped_model).answers(problems, task)
            else:
                references = [
                    oracle_answer(Sample(task=task, problem=p, rounds=((p[0],),), answer="0", complexity=1))
                    for p in problems
                ]
            kept = 0
            for problem, (rounds, answer, malformed, _), ref in zip(problems, chains, references):
                if kept >= cap:
                    break
                if malformed or answer != ref:
                    continue
                accepted.append(generated_sample(task, problem, rounds, answer, malformed))
                kept += 1
        rate = len(accepted) / max(1, attempted)
        if not accepted:
            print(f"warning: phase {phase_no} produced no accepted samples; skipped")
            result.phase_stats.append(PhaseResult(phase_no, lengths_used, attempted, 0, 0.0, skipped=True))
            continue
        keep = max(0, sum(total_per_task.get(t.value, 0) for t in tasks) - len(accepted))
        keep_idx = rng.permutation(len(current_data))[:keep]
        current_data = [current_data[i] for i in keep_idx] + accepted
        hyper = hyper_template or TrainHyper()
        hyper = TrainHyper(**{**hyper.to_dict(), "epochs": schedule.epochs_per_phase, "lr": schedule.lr})
        trainer = Trainer(current_model, current_data, hyper, out_dir / f"phase{phase_no}")
        trainer.run(resume=True, quiet=True)
        result.phase_datasets.append(list(current_data))
        result.phase_stats.append(PhaseResult(phase_no, lengths_used, attempted, len(accepted), rate))
    result.model = current_model
    return result
