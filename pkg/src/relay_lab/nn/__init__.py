"""Dense compute substrate: blocks, losses, optimizer, checkpointing."""

from .blocks import BlockStack, KVCache, LayerNorm, MultiHeadAttention, TransformerBlock, init_weights, normalize_only
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .losses import cross_entropy_masked, cross_entropy_masked_sum
from .optim import AdamW, NonFiniteGradientError, linear_schedule_factor
from .rope import rotate

__all__ = [
    "AdamW",
    "BlockStack",
    "CheckpointError",
    "GradCheckReport",
    "KVCache",
    "LayerNorm",
    "MultiHeadAttention",
    "NonFiniteGradientError",
    "TransformerBlock",
    "cross_entropy_masked",
    "cross_entropy_masked_sum",
    "grad_check",
    "init_weights",
    "linear_schedule_factor",
    "load_checkpoint",
    "normalize_only",
    "rotate",
    "save_checkpoint",
]
