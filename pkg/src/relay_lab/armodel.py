"""Decoder-only auto-regressive chain-of-thought model.

Chains are flat token sequences: problem (task tag first), then the
reasoning rounds joined by their own delimiters, the answer and <eos>.
Training is teacher-forced with loss only on post-problem positions;
generation is greedy with an incremental key/value cache.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .corpus.arithmetic import EQ, is_number
from .corpus.samples import Sample, TaskKind
from .corpus.vocab import EOS, SEP, VOCAB
from .nn.blocks import BlockStack, KVCache, LayerNorm, init_weights


@dataclass
class ARConfig:
    vocab_size: int = len(VOCAB)
    hidden: int = 256
    layers: int = 3
    heads: int = 4
    dropout: float = 0.1
    max_seq_len: int = 2048
    rope_theta: float = 10000.0

    def to_dict(self) -> dict:
        return dict(
            kind="ar",
            vocab_size=self.vocab_size,
            hidden=self.hidden,
            layers=self.layers,
            heads=self.heads,
            dropout=self.dropout,
            max_seq_len=self.max_seq_len,
            rope_theta=self.rope_theta,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "ARConfig":
        return cls(**{k: v for k, v in d.items() if k != "kind"})


class ARModel(nn.Module):
    def __init__(self, config: ARConfig) -> None:
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.hidden)
        self.stack = BlockStack(config.layers, config.hidden, config.heads, config.dropout, config.rope_theta)
        self.final_norm = LayerNorm(config.hidden)
        self.lm_head = nn.Linear(config.hidden, config.vocab_size)
        init_weights(self)

    def forward(
        self,
        ids: torch.Tensor,
        train: bool = False,
        cache: KVCache | None = None,
        position_offset: int = 0,
    ) -> torch.Tensor:
        """Causal next-token logits (B, L, V)."""
        h = self.embedding(ids)
        positions = torch.arange(position_offset, position_offset + ids.shape[1], device=ids.device)
        h = self.stack(h, positions, causal=True, train=train, cache=cache)
        return self.lm_head(self.final_norm(h))

    def new_cache(self) -> KVCache:
        return KVCache(self.config.layers)


class ChainParseError(ValueError):
    """A flat token stream is not a decodable chain; carries the position."""

    def __init__(self, position: int, message: str) -> None:
        super().__init__(f"position {position}: {message}")
        self.position = position


@dataclass(frozen=True)
class ChainEncoding:
    tokens: tuple[str, ...]
    prefix_len: int  # problem length including the task tag


def encode_chain(sample: Sample) -> ChainEncoding:
    """Flatten a sample into [problem..., rounds..., answer, <eos>].

    Arithmetic rounds already terminate in the answer round, so the answer
    token is not repeated there.
    """
    tokens: list[str] = list(sample.problem)
    for r in sample.rounds:
        tokens.extend(r)
    if sample.task is not TaskKind.ARITHMETIC:
        tokens.append(sample.answer)
    tokens.append(EOS)
    return ChainEncoding(tokens=tuple(tokens), prefix_len=len(sample.problem))


def decode_chain_text(tokens: list[str] | tuple[str, ...], task: TaskKind) -> tuple[list[list[str]], str]:
    """Parse generated continuation tokens (everything after the problem)
    back into rounds and an answer.  Raises ChainParseError on undecodable
    streams, including a missing <eos>."""
    toks = list(tokens)
    if EOS not in toks:
        raise ChainParseError(len(toks), "missing <eos>")
    toks = toks[: toks.index(EOS)]
    if not toks:
        raise ChainParseError(0, "empty chain")
    delimiter = {TaskKind.ARITHMETIC: EQ, TaskKind.EDIT_DISTANCE: ",", TaskKind.LIS: SEP}[task]
    rounds: list[list[str]] = []
    current: list[str] = []
    for i, tok in enumerate(toks):
        current.append(tok)
        if tok == delimiter:
            rounds.append(current)
            current = []
    if task is TaskKind.ARITHMETIC:
        # the remainder after the last "=" is the answer round
        if len(current) != 1 or not is_number(current[0]):
            raise ChainParseError(len(toks), f"expected a single numeric answer, got {current!r}")
        rounds.append(current)
        return rounds, current[0]
    if not rounds:
        raise ChainParseError(0, f"no {delimiter!r}-terminated rounds found")
    if len(current) != 1 or not is_number(current[0]):
        raise ChainParseError(len(toks), f"expected a single numeric answer, got {current!r}")
    return rounds, current[0]


def default_max_new(longest_train_chain: int) -> int:
    """Generation budget: four times the longest training continuation."""
    return 4 * longest_train_chain


@torch.no_grad()
def generate_batch(
    model: ARModel,
    problems: list[tuple[str, ...]],
    max_new: int,
) -> list[tuple[list[list[str]], str, bool, list[str]]]:
    """Greedy generation for a batch of same-length problems.

    Returns (rounds, answer, malformed, raw_tokens) per problem.  On an
    unparseable stream the answer falls back to the last token before
    <eos> (empty when absent) and the malformed flag is set.
    """
    model.eval()
    length = len(problems[0])
    if any(len(p) != length for p in problems):
        raise ValueError("generate_batch needs same-length problems")
    task = TaskKind.from_name(problems[0][0])
    device = next(model.parameters()).device
    ids = torch.tensor([VOCAB.encode(list(p)) for p in problems], dtype=torch.long, device=device)
    cache = model.new_cache()
    logits = model.forward(ids, train=False, cache=cache, position_offset=0)
    next_ids = logits[:, -1].argmax(dim=-1)
    eos_id = VOCAB.eos_id
    batch = len(problems)
    done = torch.zeros(batch, dtype=torch.bool)
    streams: list[list[int]] = [[] for _ in range(batch)]
    for step in range(max_new):
        for row in range(batch):
            if not done[row]:
                streams[row].append(int(next_ids[row]))
        done |= next_ids.cpu() == eos_id
        if bool(done.all()) or step == max_new - 1:
            break
        logits = model.forward(next_ids[:, None], train=False, cache=cache, position_offset=length + step)
        next_ids = logits[:, -1].argmax(dim=-1)
    results = []
    for row in range(batch):
        raw = VOCAB.decode(streams[row])
        try:
            rounds, answer = decode_chain_text(raw, task)
            results.append((rounds, answer, False, raw))
        except ChainParseError:
            before_eos = raw[: raw.index(EOS)] if EOS in raw else raw
            answer = before_eos[-1] if before_eos else ""
            results.append(([], answer, True, raw))
    return results


def generate(
    model: ARModel,
    problem: tuple[str, ...] | list[str],
    max_new: int,
) -> tuple[list[list[str]], str, bool, list[str]]:
    """Single-problem greedy generation."""
    return generate_batch(model, [tuple(problem)], max_new)[0]


__all__ = [
    "ARConfig",
    "ARModel",
    "ChainEncoding",
    "ChainParseError",
    "decode_chain_text",
    "default_max_new",
    "encode_chain",
    "generate",
    "generate_batch",
]
