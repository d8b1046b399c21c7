"""Transformer building blocks: layer norm, rotary multi-head attention,
pre-norm residual block, and a reusable block stack.

The same stack serves both model families: the looped encoder applies it
repeatedly with bidirectional attention, the decoder applies its own
per-layer instances causally with an optional key/value cache.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .losses import promote_fp
from .rope import rotate

INIT_STD = 0.02


class LayerNorm(nn.Module):
    """Standard layer norm with gain and bias."""

    def __init__(self, dim: int, eps: float = 1e-5) -> None:
        super().__init__()
        self.gain = nn.Parameter(torch.ones(dim))
        self.bias = nn.Parameter(torch.zeros(dim))
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.layer_norm(x, self.gain.shape, self.gain, self.bias, self.eps)


def normalize_only(x: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    """Layer norm before gain/bias; exposed for the numeric invariants."""
    return F.layer_norm(x, x.shape[-1:], eps=eps)


class KVCache:
    """Per-block key/value memory for incremental causal decoding."""

    def __init__(self, num_blocks: int) -> None:
        self.keys: list[torch.Tensor | None] = [None] * num_blocks
        self.values: list[torch.Tensor | None] = [None] * num_blocks

    def update(self, block: int, k: torch.Tensor, v: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if self.keys[block] is None:
            self.keys[block] = k
            self.values[block] = v
        else:
            self.keys[block] = torch.cat((self.keys[block], k), dim=-2)
            self.values[block] = torch.cat((self.values[block], v), dim=-2)
        return self.keys[block], self.values[block]

    def length(self, block: int = 0) -> int:
        k = self.keys[block]
        return 0 if k is None else k.shape[-2]


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float, rope_theta: float = 10000.0) -> None:
        super().__init__()
        if dim % heads:
            raise ValueError(f"hidden dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.dropout = dropout
        self.rope_theta = rope_theta
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.o_proj = nn.Linear(dim, dim)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, l, _ = x.shape
        return x.view(b, l, self.heads, self.head_dim).transpose(1, 2)

    def forward(
        self,
        x: torch.Tensor,
        positions: torch.Tensor,
        causal: bool,
        train: bool,
        cache: KVCache | None = None,
        block_index: int = 0,
    ) -> torch.Tensor:
        b, l, _ = x.shape
        q = self._split(self.q_proj(x))
        k = self._split(self.k_proj(x))
        v = self._split(self.v_proj(x))
        q = rotate(q, positions, self.rope_theta)
        k = rotate(k, positions, self.rope_theta)
        if cache is not None:
            k, v = cache.update(block_index, k, v)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if causal and l > 1:
            # with a cache the query block sits at the end of the keys
            offset = k.shape[-2] - l
            mask = torch.ones(l, k.shape[-2], dtype=torch.bool, device=x.device)
            mask = torch.triu(mask, diagonal=offset + 1)
            scores = scores.masked_fill(mask, float("-inf"))
        attn = torch.softmax(promote_fp(scores), dim=-1).to(v.dtype)
        if train and self.dropout > 0:
            attn = F.dropout(attn, self.dropout, training=True)
        out = (attn @ v).transpose(1, 2).reshape(b, l, self.dim)
        return self.o_proj(out)

    def attention_weights(self, x: torch.Tensor, positions: torch.Tensor, causal: bool) -> torch.Tensor:
        """Post-softmax attention matrix (no dropout); for inspection/tests."""
        q = rotate(self._split(self.q_proj(x)), positions, self.rope_theta)
        k = rotate(self._split(self.k_proj(x)), positions, self.rope_theta)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if causal:
            l = x.shape[1]
            mask = torch.triu(torch.ones(l, l, dtype=torch.bool, device=x.device), diagonal=1)
            scores = scores.masked_fill(mask, float("-inf"))
        return torch.softmax(promote_fp(scores), dim=-1)


class TransformerBlock(nn.Module):
    """Pre-norm residual block: x + Attn(LN(x)), then x + FFN(LN(x))."""

    def __init__(self, dim: int, heads: int, dropout: float, rope_theta: float = 10000.0) -> None:
        super().__init__()
        self.attn_norm = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, dropout, rope_theta)
        self.ffn_norm = LayerNorm(dim)
        self.ffn_in = nn.Linear(dim, 4 * dim)
        self.ffn_out = nn.Linear(4 * dim, dim)
        self.dropout = dropout

    def forward(
        self,
        x: torch.Tensor,
        positions: torch.Tensor,
        causal: bool,
        train: bool,
        cache: KVCache | None = None,
        block_index: int = 0,
    ) -> torch.Tensor:
        x = x + self.attn(self.attn_norm(x), positions, causal, train, cache, block_index)
        h = self.ffn_out(F.gelu(self.ffn_in(self.ffn_norm(x))))
        if train and self.dropout > 0:
            h = F.dropout(h, self.dropout, training=True)
        return x + h


class BlockStack(nn.Module):
    """A fixed stack of blocks applied in sequence; one set of weights.

    The looped model calls the same stack once per iteration, so mutating
    its parameters changes every iteration at once.
    """

    def __init__(self, layers: int, dim: int, heads: int, dropout: float, rope_theta: float = 10000.0) -> None:
        super().__init__()
        self.blocks = nn.ModuleList(
            TransformerBlock(dim, heads, dropout, rope_theta) for _ in range(layers)
        )

    def forward(
        self,
        x: torch.Tensor,
        positions: torch.Tensor,
        causal: bool,
        train: bool,
        cache: KVCache | None = None,
    ) -> torch.Tensor:
        for i, block in enumerate(self.blocks):
            x = block(x, positions, causal, train, cache, block_index=i)
        return x


def init_weights(module: nn.Module) -> None:
    """normal(0, 0.02) projections, zero biases; norm gain/bias untouched."""
    for m in module.modules():
        if isinstance(m, nn.Linear):
            nn.init.normal_(m.weight, mean=0.0, std=INIT_STD)
            nn.init.zeros_(m.bias)
        elif isinstance(m, nn.Embedding):
            nn.init.normal_(m.weight, mean=0.0, std=INIT_STD)
