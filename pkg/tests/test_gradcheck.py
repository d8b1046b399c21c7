from __future__ import annotations

import torch

from relay_lab.checks import gradcheck_ar, gradcheck_linear, gradcheck_looped
from relay_lab.nn.gradcheck import grad_check


def test_looped_total_loss_gradients() -> None:
    report = gradcheck_looped(seed=0)
    assert report.passed, report.summary()
    assert report.max_rel_error <= 1e-5


def test_ar_masked_loss_gradients() -> None:
    report = gradcheck_ar(seed=0)
    assert report.passed, report.summary()


def test_linear_layer_tight_tolerance() -> None:
    report = gradcheck_linear(seed=0)
    assert report.passed, report.summary()
    assert report.max_rel_error <= 1e-8


def test_corrupted_gradient_fails_the_check() -> None:
    """Negative control: a backward pass scaled by 1.05 must be caught."""

    class _WrongBackward(torch.autograd.Function):
        @staticmethod
        def forward(ctx, x):
            return x.clone()

        @staticmethod
        def backward(ctx, grad):
            return grad * 1.05

    layer = torch.nn.Linear(6, 3, dtype=torch.float64)
    x = torch.randn(4, 6, dtype=torch.float64)

    def loss_fn() -> torch.Tensor:
        return (_WrongBackward.apply(layer(x)) ** 2).mean()

    report = grad_check(loss_fn, dict(layer.named_parameters()), tolerance=1e-5, seed=0)
    assert not report.passed
    assert report.max_rel_error > 0.01
    assert report.worst[0].parameter in ("weight", "bias")


def test_float32_parameters_rejected() -> None:
    layer = torch.nn.Linear(3, 3)
    try:
        grad_check(lambda: layer(torch.randn(1, 3)).sum(), dict(layer.named_parameters()))
    except ValueError as e:
        assert "float64" in str(e)
    else:
        raise AssertionError("expected ValueError for float32 parameters")
