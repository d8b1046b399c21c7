"""Training engine shared by the looped and auto-regressive models.

Looped batches are rectangular buckets keyed by (task, iterations, width);
decoder batches are length-sorted chunks padded to their own maximum.
Large batches are split into micro-batches whose losses are pooled with
precomputed mask counts, so the optimizer sees exactly the full-batch
loss regardless of the split.  Single-job runs are bit-reproducible from
(seed, config); checkpoints carry optimizer moments and the torch RNG
state so resumed runs continue the same trajectory.
"""

from __future__ import annotations

import csv
import math
import subprocess
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import __version__
from .alignment import build_alignment, target_width
from .armodel import ARConfig, ARModel, encode_chain
from .corpus.samples import Sample, TaskKind
from .corpus.vocab import VOCAB
from .looped import LoopedConfig, LoopedModel
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.losses import cross_entropy_masked_sum, promote_fp
from .nn.optim import AdamW, linear_schedule_factor


def code_version() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=5, cwd=Path(__file__).parent,
        ).stdout.strip()
    except OSError:
        rev = ""
    return f"relay-lab {__version__}" + (f" ({rev})" if rev else "")


@dataclass
class TrainHyper:
    """Optimization settings (defaults follow the training recipe tables)."""

    epochs: int = 500
    batch_size: int = 512
    lr: float = 5e-4
    weight_decay: float = 0.01
    warmup_ratio: float = 0.01
    task_weights: dict[str, float] = field(default_factory=lambda: {"ARI": 1.0, "ED": 1.0, "LIS": 1.0})
    seed: int = 0
    amp: bool = False
    micro_token_budget: int = 250_000
    early_stop_accuracy: float | None = None
    eval_every: int = 1
    checkpoint_every: int = 1

    def to_dict(self) -> dict:
        return dict(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            weight_decay=self.weight_decay,
            warmup_ratio=self.warmup_ratio,
            task_weights=dict(self.task_weights),
            seed=self.seed,
            amp=self.amp,
            micro_token_budget=self.micro_token_budget,
            early_stop_accuracy=self.early_stop_accuracy,
            eval_every=self.eval_every,
            checkpoint_every=self.checkpoint_every,
        )


class TrainingDiverged(RuntimeError):
    pass


# --------------------------------------------------------------------------
# sample -> tensor preparation


@dataclass
class LoopedBucket:
    task: TaskKind
    iterations: int
    width: int
    ids: np.ndarray        # (N, W) int16, left-padded problems
    targets: np.ndarray    # (N, T, W) int16
    masks: np.ndarray      # (N, T, W) bool
    answers: np.ndarray    # (N,) int16

    def __len__(self) -> int:
        return self.ids.shape[0]


def looped_buckets(samples: list[Sample]) -> dict[tuple[str, int, int], LoopedBucket]:
    """Group samples into rectangular (task, iterations, width) buckets."""
    grouped: dict[tuple[str, int, int], list[Sample]] = {}
    for s in samples:
        key = (s.task.value, s.complexity, target_width(s))
        grouped.setdefault(key, []).append(s)
    pad = VOCAB.pad_id
    out: dict[tuple[str, int, int], LoopedBucket] = {}
    for (task_name, t_iter, width), group in sorted(grouped.items()):
        n = len(group)
        ids = np.full((n, width), pad, dtype=np.int16)
        targets = np.zeros((n, t_iter, width), dtype=np.int16)
        masks = np.zeros((n, t_iter, width), dtype=bool)
        answers = np.zeros(n, dtype=np.int16)
        for row, s in enumerate(group):
            enc = VOCAB.encode(list(s.problem))
            ids[row, width - len(enc):] = enc
            for t, tgt in enumerate(build_alignment(s)):
                targets[row, t] = VOCAB.encode(list(tgt.tokens))
                masks[row, t] = np.asarray(tgt.mask, dtype=bool)
            answers[row] = VOCAB.id_of(s.answer)
        out[(task_name, t_iter, width)] = LoopedBucket(
            task=TaskKind.from_name(task_name), iterations=t_iter, width=width,
            ids=ids, targets=targets, masks=masks, answers=answers,
        )
    return out


@dataclass
class ARRecord:
    task: TaskKind
    ids: np.ndarray  # (L,) int16 flat chain
    prefix_len: int


def ar_records(samples: list[Sample], max_seq_len: int) -> tuple[list[ARRecord], int]:
    """Flatten chains; samples longer than the context are rejected."""
    records: list[ARRecord] = []
    rejected = 0
    for s in samples:
        enc = encode_chain(s)
        if len(enc.tokens) > max_seq_len:
            rejected += 1
            continue
        records.append(ARRecord(
            task=s.task,
            ids=np.asarray(VOCAB.encode(list(enc.tokens)), dtype=np.int16),
            prefix_len=enc.prefix_len,
        ))
    return records, rejected


# --------------------------------------------------------------------------
# logging


class TrainLogger:
    """CSV log: step,epoch,task,loss_total,loss_ans,loss_iter,lr"""

    COLUMNS = ["step", "epoch", "task", "loss_total", "loss_ans", "loss_iter", "lr"]

    def __init__(self, path: Path, resume: bool) -> None:
        self.path = path
        mode = "a" if (resume and path.exists()) else "w"
        self._fh = open(path, mode, newline="")
        self._writer = csv.writer(self._fh)
        if mode == "w":
            self._writer.writerow(self.COLUMNS)

    def log(self, step: int, epoch: int, task: str, total: float, ans: float, it: float, lr: float) -> None:
        self._writer.writerow([step, epoch, task, f"{total:.6f}", f"{ans:.6f}", f"{it:.6f}", f"{lr:.8f}"])

    def close(self) -> None:
        self._fh.flush()
        self._fh.close()


# --------------------------------------------------------------------------
# evaluation proxies used for early stopping


@torch.no_grad()
def looped_answer_accuracy(model: LoopedModel, samples: list[Sample], batch_size: int = 512) -> float:
    model.eval()
    buckets = looped_buckets(samples)
    correct = 0
    for bucket in buckets.values():
        for start in range(0, len(bucket), batch_size):
            ids = torch.from_numpy(bucket.ids[start:start + batch_size].astype(np.int64))
            out = model.forward(ids, bucket.iterations, train=False, want_round_logits=False)
            pred = out.answer_logits.argmax(dim=-1).numpy()
            correct += int((pred == bucket.answers[start:start + batch_size]).sum())
    return correct / max(1, len(samples))


@torch.no_grad()
def ar_forced_chain_accuracy(model: ARModel, samples: list[Sample], batch_size: int = 256) -> float:
    """Teacher-forced proxy: fraction of samples whose every post-problem
    token is the argmax continuation.  Cheap stand-in for full generation
    while training."""
    model.eval()
    records, _ = ar_records(samples, model.config.max_seq_len)
    order = np.argsort([len(r.ids) for r in records], kind="stable")
    correct = 0
    pad = VOCAB.pad_id
    for start in range(0, len(order), batch_size):
        chunk = [records[i] for i in order[start:start + batch_size]]
        width = max(len(r.ids) for r in chunk)
        ids = np.full((len(chunk), width), pad, dtype=np.int64)
        for row, r in enumerate(chunk):
            ids[row, : len(r.ids)] = r.ids
        ids_t = torch.from_numpy(ids)
        logits = model.forward(ids_t, train=False)
        pred = logits[:, :-1].argmax(dim=-1).numpy()
        tgt = ids[:, 1:]
        for row, r in enumerate(chunk):
            lo, hi = r.prefix_len - 1, len(r.ids) - 1
            if (pred[row, lo:hi] == tgt[row, lo:hi]).all():
                correct += 1
    return correct / max(1, len(records))


# --------------------------------------------------------------------------
# trainer


@dataclass
class _Batch:
    task: TaskKind
    weight: float
    micro_slices: list
    log_sizes: tuple  # bookkeeping for exact pooled losses


class Trainer:
    """Epoch-based trainer for either model family.

    mode "looped": model is a LoopedModel, batches come from rectangular
    buckets.  mode "ar": model is an ARModel, batches are length-sorted
    chunks.  One optimizer step per logical batch.
    """

    def __init__(
        self,
        model: LoopedModel | ARModel,
        samples: list[Sample],
        hyper: TrainHyper,
        out_dir: str | Path,
        eval_samples: list[Sample] | None = None,
        log_name: str = "train_log.csv",
    ) -> None:
        self.model = model
        self.mode = "looped" if isinstance(model, LoopedModel) else "ar"
        self.hyper = hyper
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.eval_samples = eval_samples
        self.log_path = self.out_dir / log_name
        self.checkpoint_path = self.out_dir / "checkpoint.ckpt"
        self.rejected = 0
        if self.mode == "looped":
            self.buckets = looped_buckets(samples)
            self.steps_per_epoch = sum(
                math.ceil(len(b) / hyper.batch_size) for b in self.buckets.values()
            )
        else:
            self.records, self.rejected = ar_records(samples, model.config.max_seq_len)
            self.steps_per_epoch = math.ceil(len(self.records) / hyper.batch_size)
        self.total_steps = self.steps_per_epoch * hyper.epochs
        self.optimizer = AdamW(
            model.named_parameters(),
            lr=hyper.lr,
            weight_decay=hyper.weight_decay,
        )
        self.global_step = 0
        self.start_epoch = 0
        self.stopped_early = False
        self.current_lr = hyper.lr

    # -- checkpointing ------------------------------------------------------

    def _model_config_dict(self) -> dict:
        return self.model.config.to_dict()

    def save(self, epoch: int) -> None:
        tensors: dict[str, torch.Tensor] = {}
        for name, p in self.model.state_dict().items():
            tensors[f"model.{name}"] = p
        for name, p in self.model.named_parameters():
            state = self.optimizer.state.get(p)
            if state:
                tensors[f"opt.m.{name}"] = state["exp_avg"]
                tensors[f"opt.v.{name}"] = state["exp_avg_sq"]
        tensors["rng.torch"] = torch.get_rng_state()
        meta = dict(
            model_config=self._model_config_dict(),
            hyper=self.hyper.to_dict(),
            epoch=epoch,
            global_step=self.global_step,
            opt_steps={name: self.optimizer.state[p]["step"]
                       for name, p in self.model.named_parameters()
                       if self.optimizer.state.get(p)},
            version=code_version(),
            stopped_early=self.stopped_early,
        )
        save_checkpoint(self.checkpoint_path, tensors, meta)

    def try_resume(self) -> bool:
        if not self.checkpoint_path.exists():
            return False
        tensors, meta = load_checkpoint(self.checkpoint_path)
        if meta["model_config"] != self._model_config_dict():
            raise ValueError("checkpoint configuration does not match this run")
        self.model.load_state_dict(
            {k[len("model."):]: v for k, v in tensors.items() if k.startswith("model.")}
        )
        for name, p in self.model.named_parameters():
            m_key, v_key = f"opt.m.{name}", f"opt.v.{name}"
            if m_key in tensors:
                self.optimizer.state[p] = dict(
                    step=meta["opt_steps"][name],
                    exp_avg=tensors[m_key].to(p.dtype),
                    exp_avg_sq=tensors[v_key].to(p.dtype),
                )
        torch.set_rng_state(tensors["rng.torch"].to(torch.uint8))
        self.global_step = meta["global_step"]
        self.start_epoch = meta["epoch"] + 1
        self.stopped_early = bool(meta.get("stopped_early", False))
        return True

    # -- batching -----------------------------------------------------------

    def _epoch_batches(self, epoch: int) -> list:
        rng = np.random.default_rng((self.hyper.seed, epoch))
        batches = []
        if self.mode == "looped":
            for key in sorted(self.buckets):
                bucket = self.buckets[key]
                perm = rng.permutation(len(bucket))
                for start in range(0, len(bucket), self.hyper.batch_size):
                    batches.append((key, perm[start:start + self.hyper.batch_size]))
        else:
            perm = rng.permutation(len(self.records))
            lengths = np.array([len(self.records[i].ids) for i in perm])
            order = perm[np.argsort(lengths, kind="stable")]
            for start in range(0, len(order), self.hyper.batch_size):
                batches.append(order[start:start + self.hyper.batch_size])
        rng.shuffle(batches)
        return batches

    # -- single optimizer steps --------------------------------------------

    def _micro_ranges(self, rows: int, tokens_per_row: int) -> list[tuple[int, int]]:
        budget = max(1, self.hyper.micro_token_budget // max(1, tokens_per_row))
        return [(s, min(s + budget, rows)) for s in range(0, rows, budget)]

    def _step_looped(self, key: tuple, idx: np.ndarray) -> tuple[str, float, float, float]:
        bucket = self.buckets[key]
        lam = self.model.config.alignment_weight
        weight = self.hyper.task_weights.get(bucket.task.value, 1.0)
        t_iter, width = bucket.iterations, bucket.width
        masks_np = bucket.masks[idx]
        rows = len(idx)
        # per-iteration mask totals let micro-batches pool to the exact mean
        counts_t = masks_np.reshape(rows, t_iter, width).sum(axis=(0, 2)).astype(np.float64)
        counts_t = np.maximum(counts_t, 1.0)
        self.optimizer.zero_grad(set_to_none=True)
        total_sum = ans_sum = iter_sum = 0.0
        for lo, hi in self._micro_ranges(rows, t_iter * width):
            sel = idx[lo:hi]
            ids = torch.from_numpy(bucket.ids[sel].astype(np.int64))
            answers = torch.from_numpy(bucket.answers[sel].astype(np.int64))
            with torch.autocast("cpu", dtype=torch.bfloat16, enabled=self.hyper.amp):
                out = self.model.forward(ids, t_iter, train=True, want_round_logits=lam > 0)
                ans_part = F.cross_entropy(promote_fp(out.answer_logits), answers, reduction="sum") / rows
                if lam > 0:
                    targets = torch.from_numpy(bucket.targets[sel].astype(np.int64))
                    masks = torch.from_numpy(bucket.masks[sel])
                    parts = [
                        cross_entropy_masked_sum(out.round_logits[t], targets[:, t], masks[:, t]) / counts_t[t]
                        for t in range(t_iter)
                    ]
                    iter_part = torch.stack(parts).sum() / t_iter
                else:
                    iter_part = torch.zeros((), dtype=torch.float32)
            loss = weight * (ans_part + lam * iter_part)
            loss.backward()
            total_sum += float(loss.detach())
            ans_sum += float(ans_part.detach())
            iter_sum += float(iter_part.detach())
        self._apply_step()
        return bucket.task.value, total_sum, ans_sum, iter_sum

    def _step_ar(self, idx: np.ndarray) -> tuple[str, float, float, float]:
        chunk = [self.records[i] for i in idx]
        rows = len(chunk)
        width = max(len(r.ids) for r in chunk)
        pad = VOCAB.pad_id
        ids = np.full((rows, width), pad, dtype=np.int64)
        mask = np.zeros((rows, width - 1), dtype=bool)
        for row, r in enumerate(chunk):
            ids[row, : len(r.ids)] = r.ids
            mask[row, r.prefix_len - 1 : len(r.ids) - 1] = True
        count = max(1, int(mask.sum()))
        # one task per batch keeps the weight a scalar
        weight = self.hyper.task_weights.get(chunk[0].task.value, 1.0)
        self.optimizer.zero_grad(set_to_none=True)
        total_sum = ans_sum = 0.0
        for lo, hi in self._micro_ranges(rows, width):
            ids_t = torch.from_numpy(ids[lo:hi])
            mask_t = torch.from_numpy(mask[lo:hi])
            with torch.autocast("cpu", dtype=torch.bfloat16, enabled=self.hyper.amp):
                logits = self.model.forward(ids_t[:, :], train=True)
                part = cross_entropy_masked_sum(logits[:, :-1], ids_t[:, 1:], mask_t) / count
            loss = weight * part
            loss.backward()
            total_sum += float(loss.detach())
            ans_sum += float(part.detach())
        self._apply_step()
        return chunk[0].task.value, total_sum, ans_sum, 0.0

    def _apply_step(self) -> None:
        factor = linear_schedule_factor(self.global_step, self.total_steps, self.hyper.warmup_ratio)
        self.current_lr = self.hyper.lr * factor
        self.optimizer.set_lr(self.current_lr)
        self.optimizer.step()
        self.global_step += 1

    def _eval_proxy(self) -> float:
        if self.eval_samples is None:
            return float("nan")
        if self.mode == "looped":
            return looped_answer_accuracy(self.model, self.eval_samples)
        return ar_forced_chain_accuracy(self.model, self.eval_samples)

    # -- main loop ----------------------------------------------------------

    def run(self, resume: bool = True, quiet: bool = False) -> dict:
        resumed = self.try_resume() if resume else False
        if not resumed:
            torch.manual_seed(self.hyper.seed)
        if self.stopped_early:
            return {"epochs_run": self.start_epoch, "resumed": True, "stopped_early": True}
        logger = TrainLogger(self.log_path, resume=resumed)
        history: list[float] = []
        epoch = self.start_epoch - 1
        try:
            for epoch in range(self.start_epoch, self.hyper.epochs):
                self.model.train()
                for batch in self._epoch_batches(epoch):
                    if self.mode == "looped":
                        key, idx = batch
                        task, total, ans, it = self._step_looped(key, idx)
                    else:
                        task, total, ans, it = self._step_ar(batch)
                    if not math.isfinite(total):
                        logger.close()
                        raise TrainingDiverged(
                            f"non-finite loss at step {self.global_step}; last checkpoint retained"
                        )
                    logger.log(self.global_step, epoch, task, total, ans, it, self.current_lr)
                should_eval = (
                    self.eval_samples is not None
                    and (epoch % self.hyper.eval_every == 0 or epoch == self.hyper.epochs - 1)
                )
                accuracy = self._eval_proxy() if should_eval else float("nan")
                if should_eval:
                    history.append(accuracy)
                    if not quiet:
                        print(f"epoch {epoch}: eval accuracy {accuracy:.4f}", flush=True)
                if (
                    self.hyper.early_stop_accuracy is not None
                    and should_eval
                    and accuracy >= self.hyper.early_stop_accuracy
                ):
                    self.stopped_early = True
                    self.save(epoch)
                    break
                if epoch % self.hyper.checkpoint_every == 0 or epoch == self.hyper.epochs - 1:
                    self.save(epoch)
        finally:
            logger.close()
        return {
            "epochs_run": epoch + 1,
            "resumed": resumed,
            "stopped_early": self.stopped_early,
            "eval_history": history,
            "rejected": self.rejected,
        }


# --------------------------------------------------------------------------
# model (de)serialization helpers


def save_model(path: str | Path, model: LoopedModel | ARModel, extra_meta: dict | None = None) -> None:
    tensors = {f"model.{k}": v for k, v in model.state_dict().items()}
    meta = dict(model_config=model.config.to_dict(), version=code_version())
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, tensors, meta)


def load_model(path: str | Path) -> LoopedModel | ARModel:
    tensors, meta = load_checkpoint(path)
    config = meta["model_config"]
    model: LoopedModel | ARModel
    if config["kind"] == "looped":
        model = LoopedModel(LoopedConfig.from_dict(config))
    else:
        model = ARModel(ARConfig.from_dict(config))
    model.load_state_dict({k[len("model."):]: v for k, v in tensors.items() if k.startswith("model.")})
    model.eval()
    return model


def clone_model(model: LoopedModel | ARModel) -> LoopedModel | ARModel:
    if isinstance(model, LoopedModel):
        twin = LoopedModel(replace(model.config))
    else:
        twin = ARModel(replace(model.config))
    twin.load_state_dict({k: v.clone() for k, v in model.state_dict().items()})
    return twin
