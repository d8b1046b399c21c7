"""Rotary position encoding applied to attention queries and keys."""

from __future__ import annotations

import torch


def rotate(x: torch.Tensor, positions: torch.Tensor, theta: float = 10000.0) -> torch.Tensor:
    """Rotate feature pairs of `x` by position-dependent angles.

    x: (..., L, head_dim) with even head_dim; positions: (L,) integer tensor.
    The rotation leaves dot products between rotated queries and keys a
    function of relative position only.
    """
    head_dim = x.shape[-1]
    if head_dim % 2:
        raise ValueError(f"head_dim must be even for rotary encoding, got {head_dim}")
    dtype = x.dtype if x.dtype in (torch.float32, torch.float64) else torch.float32
    inv_freq = 1.0 / (
        theta ** (torch.arange(0, head_dim, 2, device=x.device, dtype=dtype) / head_dim)
    )
    angles = positions.to(dtype)[:, None] * inv_freq[None, :]  # (L, head_dim/2)
    cos = torch.cos(angles)
    sin = torch.sin(angles)
    x_even = x[..., 0::2]
    x_odd = x[..., 1::2]
    out = torch.empty_like(x)
    out[..., 0::2] = x_even * cos - x_odd * sin
    out[..., 1::2] = x_even * sin + x_odd * cos
    return out
