"""Looped transformer: one weight-shared block stack applied `complexity`
times, with an intermediate head supervised on right-aligned rounds and a
final-answer head read at the last position of the final iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from .alignment import build_alignment, decode_aligned, inference_width, target_width
from .corpus.samples import Sample, TaskKind, complexity
from .corpus.vocab import VOCAB
from .nn.blocks import BlockStack, LayerNorm, init_weights
from .nn.losses import cross_entropy_masked, promote_fp


@dataclass
class LoopedConfig:
    vocab_size: int = len(VOCAB)
    hidden: int = 256
    layers: int = 3
    heads: int = 4
    dropout: float = 0.1
    alignment_weight: float = 1.0  # 0 trains the vanilla looped variant
    rope_theta: float = 10000.0

    def to_dict(self) -> dict:
        return dict(
            kind="looped",
            vocab_size=self.vocab_size,
            hidden=self.hidden,
            layers=self.layers,
            heads=self.heads,
            dropout=self.dropout,
            alignment_weight=self.alignment_weight,
            rope_theta=self.rope_theta,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "LoopedConfig":
        return cls(**{k: v for k, v in d.items() if k != "kind"})


@dataclass
class LoopedOutput:
    hidden_states: list[torch.Tensor] = field(default_factory=list)
    round_logits: list[torch.Tensor] = field(default_factory=list)
    answer_logits: torch.Tensor | None = None


class NormedHead(nn.Module):
    def __init__(self, dim: int, vocab_size: int) -> None:
        super().__init__()
        self.norm = LayerNorm(dim)
        self.proj = nn.Linear(dim, vocab_size)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.proj(self.norm(x))


class LoopedModel(nn.Module):
    def __init__(self, config: LoopedConfig) -> None:
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.hidden)
        self.stack = BlockStack(config.layers, config.hidden, config.heads, config.dropout, config.rope_theta)
        self.round_head = NormedHead(config.hidden, config.vocab_size)
        self.answer_head = NormedHead(config.hidden, config.vocab_size)
        init_weights(self)

    def forward(
        self,
        ids: torch.Tensor,
        iterations: int,
        train: bool = False,
        want_round_logits: bool = True,
        want_hidden: bool = False,
    ) -> LoopedOutput:
        """Bidirectional forward with `iterations` applications of the
        shared stack.  Round logits are produced at every iteration; the
        answer logits read the last position of the final iteration."""
        if iterations <= 0:
            raise ValueError(f"iterations must be positive, got {iterations}")
        out = LoopedOutput()
        h = self.embedding(ids)
        positions = torch.arange(ids.shape[1], device=ids.device)
        for _ in range(iterations):
            h = self.stack(h, positions, causal=False, train=train)
            if want_hidden:
                out.hidden_states.append(h)
            if want_round_logits:
                out.round_logits.append(self.round_head(h))
        out.answer_logits = self.answer_head(h[:, -1])
        return out


def looped_loss(
    model: LoopedModel,
    ids: torch.Tensor,
    round_targets: torch.Tensor,
    round_masks: torch.Tensor,
    answer_ids: torch.Tensor,
    train: bool = True,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Total, answer and iteration losses for one rectangular batch.

    round_targets/round_masks: (B, T, W).  The iteration loss averages the
    per-iteration masked cross-entropies; the total adds it to the answer
    loss scaled by the configured alignment weight.
    """
    lam = model.config.alignment_weight
    iterations = round_targets.shape[1]
    out = model.forward(ids, iterations, train=train, want_round_logits=lam > 0)
    ans_loss = F.cross_entropy(promote_fp(out.answer_logits), answer_ids)
    if lam > 0:
        per_iter = [
            cross_entropy_masked(out.round_logits[t], round_targets[:, t], round_masks[:, t])
            for t in range(iterations)
        ]
        iter_loss = torch.stack(per_iter).mean()
    else:
        iter_loss = torch.zeros((), dtype=ans_loss.dtype)
    total = ans_loss + lam * iter_loss
    return total, ans_loss, iter_loss


def encode_problems(problems: list[tuple[str, ...]], width: int, device: torch.device | str = "cpu") -> torch.Tensor:
    """Left-pad problems to a shared width and encode to id tensor."""
    pad = VOCAB.pad_id
    rows = []
    for p in problems:
        ids = VOCAB.encode(list(p))
        if len(ids) > width:
            raise ValueError(f"problem of {len(ids)} tokens exceeds width {width}")
        rows.append([pad] * (width - len(ids)) + ids)
    return torch.tensor(rows, dtype=torch.long, device=device)


@torch.no_grad()
def decode_chain_batch(
    model: LoopedModel,
    task: TaskKind,
    problems: list[tuple[str, ...]],
) -> list[tuple[list[list[str]], str, bool]]:
    """Greedy chain decoding for same-complexity, same-width problems.

    Returns (rounds, answer, malformed) per problem; deterministic
    (dropout off, argmax ties resolved to the lowest token id).
    """
    model.eval()
    t_iter = complexity(problems[0], task)
    width = inference_width(task, len(problems[0]))
    for p in problems[1:]:
        if complexity(p, task) != t_iter or inference_width(task, len(p)) != width:
            raise ValueError("decode_chain_batch needs uniform complexity and width")
    ids = encode_problems(problems, width)
    out = model.forward(ids, t_iter, train=False, want_round_logits=True)
    answer_ids = out.answer_logits.argmax(dim=-1).tolist()
    round_preds = [logits.argmax(dim=-1).tolist() for logits in out.round_logits]
    results = []
    for row in range(len(problems)):
        rounds: list[list[str]] = []
        malformed = False
        for t in range(t_iter):
            surfaces = VOCAB.decode(round_preds[t][row])
            round_tokens, bad = decode_aligned(surfaces)
            rounds.append(round_tokens)
            malformed = malformed or bad
        results.append((rounds, VOCAB.surface_of(answer_ids[row]), malformed))
    return results


def decode_chain(model: LoopedModel, problem: tuple[str, ...] | list[str], task: TaskKind | None = None) -> tuple[list[list[str]], str, bool]:
    """Single-problem convenience wrapper around decode_chain_batch."""
    problem = tuple(problem)
    if task is None:
        task = TaskKind.from_name(problem[0])
    return decode_chain_batch(model, task, [problem])[0]


def generated_sample(sample_task: TaskKind, problem: tuple[str, ...], rounds: list[list[str]], answer: str, malformed: bool) -> Sample:
    """Wrap a model-generated chain as a Sample (invariants not enforced)."""
    return Sample(
        task=sample_task,
        problem=problem,
        rounds=tuple(tuple(r) for r in rounds),
        answer=answer,
        complexity=complexity(problem, sample_task),
        malformed=malformed,
    )


__all__ = [
    "LoopedConfig",
    "LoopedModel",
    "LoopedOutput",
    "NormedHead",
    "build_alignment",
    "decode_chain",
    "decode_chain_batch",
    "encode_problems",
    "generated_sample",
    "inference_width",
    "looped_loss",
    "target_width",
]
