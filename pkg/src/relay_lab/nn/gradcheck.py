"""Finite-difference verification of reverse-mode gradients.

Runs in float64: central differences on a random subset of parameter
coordinates against autograd.  Relative error uses a magnitude floor so
near-zero coordinates are judged on an absolute scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import torch


@dataclass
class CoordinateResult:
    parameter: str
    index: tuple[int, ...]
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    checked: int
    worst: list[CoordinateResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [
            f"{status}: max relative error {self.max_rel_error:.3e} over "
            f"{self.checked} coordinates (tolerance {self.tolerance:.1e})"
        ]
        for r in self.worst[:5]:
            lines.append(
                f"  {r.parameter}{list(r.index)}: analytic={r.analytic:.6e} "
                f"numeric={r.numeric:.6e} rel={r.rel_error:.3e}"
            )
        return "\n".join(lines)


def grad_check(
    loss_fn: Callable[[], torch.Tensor],
    named_params: dict[str, torch.nn.Parameter],
    epsilon: float = 1e-5,
    tolerance: float = 1e-5,
    coords_per_param: int = 8,
    seed: int = 0,
    rel_floor: float = 1e-4,
) -> GradCheckReport:
    """Compare autograd gradients of `loss_fn` with central differences.

    `loss_fn` must rebuild the forward pass on every call (parameters are
    perturbed in place between calls).  All parameters must be float64.
    """
    for name, p in named_params.items():
        if p.dtype != torch.float64:
            raise ValueError(f"grad_check requires float64 parameters; {name} is {p.dtype}")
        p.grad = None

    loss = loss_fn()
    loss.backward()
    analytic = {
        name: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p))
        for name, p in named_params.items()
    }

    rng = np.random.default_rng(seed)
    results: list[CoordinateResult] = []
    with torch.no_grad():
        for name, p in named_params.items():
            flat = p.reshape(-1)
            count = min(coords_per_param, flat.numel())
            picks = rng.choice(flat.numel(), size=count, replace=False)
            for flat_idx in picks:
                orig = flat[flat_idx].item()
                flat[flat_idx] = orig + epsilon
                plus = loss_fn().item()
                flat[flat_idx] = orig - epsilon
                minus = loss_fn().item()
                flat[flat_idx] = orig
                numeric = (plus - minus) / (2 * epsilon)
                a = analytic[name].reshape(-1)[flat_idx].item()
                denom = max(abs(a), abs(numeric), rel_floor)
                rel = abs(a - numeric) / denom
                index = np.unravel_index(int(flat_idx), tuple(p.shape))
                results.append(CoordinateResult(name, tuple(int(i) for i in index), a, numeric, rel))

    results.sort(key=lambda r: r.rel_error, reverse=True)
    max_rel = results[0].rel_error if results else 0.0
    return GradCheckReport(max_rel_error=max_rel, tolerance=tolerance, checked=len(results), worst=results[:10])
