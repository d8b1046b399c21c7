"""Float64 gradient-fidelity suite: finite differences vs reverse mode on
the looped training loss, the decoder's masked next-token loss, and a bare
linear layer."""

from __future__ import annotations

import numpy as np
import torch

from .alignment import build_alignment, target_width
from .armodel import ARConfig, ARModel, encode_chain
from .corpus.samples import make_arithmetic
from .corpus.vocab import VOCAB
from .looped import LoopedConfig, LoopedModel, looped_loss
from .nn.gradcheck import GradCheckReport, grad_check
from .nn.losses import cross_entropy_masked


def _tiny_sample(seed: int = 0):
    rng = np.random.default_rng(seed)
    return make_arithmetic(3, rng)


def gradcheck_looped(seed: int = 0, tolerance: float = 1e-5) -> GradCheckReport:
    """Total (answer + alignment) loss on a d=16 single-layer looped model."""
    torch.manual_seed(seed)
    model = LoopedModel(LoopedConfig(hidden=16, layers=1, heads=4, dropout=0.0, alignment_weight=1.0))
    model.double()
    sample = _tiny_sample(seed)
    width = target_width(sample)
    ids = torch.tensor([[VOCAB.pad_id] * (width - len(sample.problem)) + VOCAB.encode(list(sample.problem))])
    targets = torch.tensor([[VOCAB.encode(list(t.tokens)) for t in build_alignment(sample)]])
    masks = torch.tensor([[list(t.mask) for t in build_alignment(sample)]], dtype=torch.bool)
    answers = torch.tensor([VOCAB.id_of(sample.answer)])

    def loss_fn() -> torch.Tensor:
        total, _, _ = looped_loss(model, ids, targets, masks, answers, train=False)
        return total

    return grad_check(loss_fn, dict(model.named_parameters()), tolerance=tolerance, seed=seed)


def gradcheck_ar(seed: int = 0, tolerance: float = 1e-5) -> GradCheckReport:
    """Masked next-token loss on a d=16 decoder."""
    torch.manual_seed(seed)
    model = ARModel(ARConfig(hidden=16, layers=1, heads=4, dropout=0.0, max_seq_len=256))
    model.double()
    enc = encode_chain(_tiny_sample(seed))
    ids = torch.tensor([VOCAB.encode(list(enc.tokens))])
    mask = torch.zeros(1, ids.shape[1] - 1, dtype=torch.bool)
    mask[0, enc.prefix_len - 1 :] = True

    def loss_fn() -> torch.Tensor:
        logits = model.forward(ids, train=False)
        return cross_entropy_masked(logits[:, :-1], ids[:, 1:], mask)

    return grad_check(loss_fn, dict(model.named_parameters()), tolerance=tolerance, seed=seed)


def gradcheck_linear(seed: int = 0, tolerance: float = 1e-8) -> GradCheckReport:
    """Bare linear layer under squared error; the easy reference case."""
    torch.manual_seed(seed)
    layer = torch.nn.Linear(12, 7, dtype=torch.float64)
    x = torch.randn(5, 12, dtype=torch.float64)
    target = torch.randn(5, 7, dtype=torch.float64)

    def loss_fn() -> torch.Tensor:
        return ((layer(x) - target) ** 2).mean()

    return grad_check(
        loss_fn,
        dict(layer.named_parameters()),
        tolerance=tolerance,
        coords_per_param=12,
        seed=seed,
        rel_floor=1e-6,
    )


def run_all(seed: int = 0) -> list[tuple[str, GradCheckReport]]:
    return [
        ("looped_total_loss", gradcheck_looped(seed)),
        ("ar_masked_loss", gradcheck_ar(seed)),
        ("linear_layer", gradcheck_linear(seed)),
    ]
