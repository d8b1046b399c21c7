"""AdamW with decoupled weight decay and a linear warmup/decay schedule."""

from __future__ import annotations

import math
from typing import Iterable, Iterator

import torch


class NonFiniteGradientError(RuntimeError):
    """A gradient turned NaN/inf; carries the parameter name."""

    def __init__(self, name: str) -> None:
        super().__init__(f"non-finite gradient in parameter {name!r}")
        self.parameter = name


class AdamW(torch.optim.Optimizer):
    """Decoupled-weight-decay Adam with bias-corrected moments.

    Accepts `model.named_parameters()` so a non-finite gradient can be
    reported by name.
    """

    def __init__(
        self,
        named_params: Iterable[tuple[str, torch.nn.Parameter]] | Iterator[tuple[str, torch.nn.Parameter]],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ) -> None:
        named = list(named_params)
        self._names = {id(p): name for name, p in named}
        defaults = dict(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay)
        super().__init__([p for _, p in named], defaults)

    @torch.no_grad()
    def step(self) -> None:  # type: ignore[override]
        for group in self.param_groups:
            lr = group["lr"]
            beta1, beta2 = group["betas"]
            eps = group["eps"]
            wd = group["weight_decay"]
            for p in group["params"]:
                if p.grad is None:
                    continue
                grad = p.grad
                if not bool(torch.isfinite(grad).all()):
                    raise NonFiniteGradientError(self._names.get(id(p), "<unnamed>"))
                state = self.state[p]
                if not state:
                    state["step"] = 0
                    state["exp_avg"] = torch.zeros_like(p)
                    state["exp_avg_sq"] = torch.zeros_like(p)
                state["step"] += 1
                step = state["step"]
                exp_avg, exp_avg_sq = state["exp_avg"], state["exp_avg_sq"]
                exp_avg.mul_(beta1).add_(grad, alpha=1 - beta1)
                exp_avg_sq.mul_(beta2).addcmul_(grad, grad, value=1 - beta2)
                if wd != 0:
                    p.mul_(1 - lr * wd)
                bias1 = 1 - beta1**step
                bias2 = 1 - beta2**step
                denom = (exp_avg_sq.sqrt() / math.sqrt(bias2)).add_(eps)
                p.addcdiv_(exp_avg, denom, value=-lr / bias1)

    def set_lr(self, lr: float) -> None:
        for group in self.param_groups:
            group["lr"] = lr


def linear_schedule_factor(step: int, total_steps: int, warmup_ratio: float) -> float:
    """Learning-rate factor: linear 0->1 over the warmup span, then linear
    decay to 0 at `total_steps`.  `step` counts completed optimizer steps."""
    if total_steps <= 0:
        return 1.0
    warmup_steps = max(1, math.ceil(warmup_ratio * total_steps))
    if step < warmup_steps:
        return (step + 1) / warmup_steps
    if total_steps == warmup_steps:
        return 1.0
    remaining = total_steps - (step + 1)
    return max(0.0, remaining / (total_steps - warmup_steps))
