"""Loss functions with explicit supervision masks."""

from __future__ import annotations

import torch
import torch.nn.functional as F


def promote_fp(t: torch.Tensor) -> torch.Tensor:
    """Upcast half-precision tensors to float32; leave f32/f64 untouched."""
    if t.dtype in (torch.bfloat16, torch.float16):
        return t.float()
    return t


def cross_entropy_masked(
    logits: torch.Tensor,
    targets: torch.Tensor,
    mask: torch.Tensor,
    return_flag: bool = False,
) -> torch.Tensor | tuple[torch.Tensor, bool]:
    """Mean token NLL over positions where mask is set.

    Masked-out positions contribute nothing: their logits are never
    touched, so their gradient is identically zero.  An all-zero mask
    yields a zero loss (zero gradient); `return_flag=True` additionally
    reports that degenerate case.
    """
    flat_mask = mask.reshape(-1).bool()
    if not bool(flat_mask.any()):
        loss = logits.sum() * 0.0
        return (loss, True) if return_flag else loss
    vocab = logits.shape[-1]
    picked_logits = logits.reshape(-1, vocab)[flat_mask]
    picked_targets = targets.reshape(-1)[flat_mask]
    loss = F.cross_entropy(promote_fp(picked_logits), picked_targets)
    return (loss, False) if return_flag else loss


def cross_entropy_masked_sum(
    logits: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor
) -> torch.Tensor:
    """Summed (unreduced) masked NLL; lets callers pool an exact mean
    across micro-batches by dividing by the precomputed mask count."""
    flat_mask = mask.reshape(-1).bool()
    if not bool(flat_mask.any()):
        return logits.sum() * 0.0
    vocab = logits.shape[-1]
    picked_logits = logits.reshape(-1, vocab)[flat_mask]
    picked_targets = targets.reshape(-1)[flat_mask]
    return F.cross_entropy(promote_fp(picked_logits), picked_targets, reduction="sum")
