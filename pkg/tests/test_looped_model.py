from __future__ import annotations

import numpy as np
import pytest
import torch

from relay_lab.alignment import build_alignment, target_width
from relay_lab.corpus import TaskKind, make_arithmetic, make_lis
from relay_lab.corpus.vocab import VOCAB
from relay_lab.looped import (
    LoopedConfig,
    LoopedModel,
    decode_chain,
    decode_chain_batch,
    encode_problems,
    looped_loss,
)


@pytest.fixture()
def tiny_model() -> LoopedModel:
    torch.manual_seed(0)
    return LoopedModel(LoopedConfig(hidden=32, layers=1, heads=4, dropout=0.0, alignment_weight=1.0))


def _sample_tensors(sample):
    width = target_width(sample)
    ids = encode_problems([sample.problem], width)
    targets = torch.tensor([[VOCAB.encode(list(t.tokens)) for t in build_alignment(sample)]])
    masks = torch.tensor([[list(t.mask) for t in build_alignment(sample)]], dtype=torch.bool)
    answers = torch.tensor([VOCAB.id_of(sample.answer)])
    return ids, targets, masks, answers


def test_single_iteration_feeds_both_heads(tiny_model: LoopedModel) -> None:
    ids = encode_problems([("[ARI]", "4", "+", "5", "=")], 5)
    out = tiny_model.forward(ids, 1, train=False, want_hidden=True)
    assert len(out.hidden_states) == 1
    assert len(out.round_logits) == 1
    assert out.answer_logits.shape == (1, len(VOCAB))


def test_forward_rejects_nonpositive_iterations(tiny_model: LoopedModel) -> None:
    ids = encode_problems([("[ARI]", "4", "+", "5", "=")], 5)
    with pytest.raises(ValueError):
        tiny_model.forward(ids, 0)


def test_weight_sharing_composes(tiny_model: LoopedModel) -> None:
    """Two iterations equal manually applying the single-iteration map twice."""
    ids = encode_problems([("[ARI]", "7", "-", "2", "=")], 5)
    positions = torch.arange(5)
    h = tiny_model.embedding(ids)
    once = tiny_model.stack(h, positions, causal=False, train=False)
    twice_manual = tiny_model.stack(once, positions, causal=False, train=False)
    out = tiny_model.forward(ids, 2, train=False, want_hidden=True)
    assert torch.allclose(out.hidden_states[0], once, atol=1e-6)
    assert torch.allclose(out.hidden_states[1], twice_manual, atol=1e-6)


def test_parameters_are_shared_storage(tiny_model: LoopedModel) -> None:
    ids = encode_problems([("[ARI]", "7", "-", "2", "=")], 5)
    base = tiny_model.forward(ids, 2, train=False).answer_logits.clone()
    with torch.no_grad():
        tiny_model.stack.blocks[0].ffn_out.weight += 0.05
    moved = tiny_model.forward(ids, 2, train=False).answer_logits
    assert not torch.allclose(base, moved)


def test_loss_lambda_zero_equals_answer_loss(tiny_model: LoopedModel) -> None:
    rng = np.random.default_rng(1)
    sample = make_arithmetic(3, rng)
    ids, targets, masks, answers = _sample_tensors(sample)
    tiny_model.config.alignment_weight = 0.0
    total, ans, it = looped_loss(tiny_model, ids, targets, masks, answers, train=False)
    assert float(total) == pytest.approx(float(ans))
    assert float(it) == 0.0
    tiny_model.config.alignment_weight = 1.0
    total2, ans2, it2 = looped_loss(tiny_model, ids, targets, masks, answers, train=False)
    assert float(total2) == pytest.approx(float(ans2) + float(it2), rel=1e-5)


def test_masked_positions_get_zero_gradient_through_loss(tiny_model: LoopedModel) -> None:
    rng = np.random.default_rng(2)
    sample = make_arithmetic(2, rng)
    ids, targets, masks, answers = _sample_tensors(sample)
    out = tiny_model.forward(ids, sample.complexity, train=False)
    logits = [l.detach().requires_grad_(True) for l in out.round_logits]
    from relay_lab.nn.losses import cross_entropy_masked

    per_iter = [
        cross_entropy_masked(logits[t], targets[:, t], masks[:, t])
        for t in range(sample.complexity)
    ]
    torch.stack(per_iter).mean().backward()
    for t in range(sample.complexity):
        grad = logits[t].grad
        off = ~masks[0, t]
        assert torch.all(grad[0, off] == 0)
        on = masks[0, t]
        assert torch.any(grad[0, on] != 0)


def test_decode_chain_totality_on_random_model(tiny_model: LoopedModel) -> None:
    rng = np.random.default_rng(3)
    problems = [make_arithmetic(3, np.random.default_rng(i)).problem for i in range(8)]
    problems = [p for p in problems if len(p) == len(problems[0])]
    results = decode_chain_batch(tiny_model, TaskKind.ARITHMETIC, problems)
    width = len(problems[0])
    for rounds, answer, malformed in results:
        assert len(rounds) == 3
        assert all(len(r) <= width for r in rounds)
        assert answer in VOCAB
    del rng


def test_decode_chain_single_wrapper(tiny_model: LoopedModel) -> None:
    sample = make_arithmetic(2, np.random.default_rng(5))
    rounds, answer, malformed = decode_chain(tiny_model, sample.problem)
    assert len(rounds) == 2


def test_decode_chain_deterministic(tiny_model: LoopedModel) -> None:
    sample = make_lis(12, np.random.default_rng(6))
    first = decode_chain(tiny_model, sample.problem)
    second = decode_chain(tiny_model, sample.problem)
    assert first == second


def test_decode_requires_uniform_shapes(tiny_model: LoopedModel) -> None:
    a = make_arithmetic(2, np.random.default_rng(7))
    b = make_arithmetic(3, np.random.default_rng(8))
    with pytest.raises(ValueError):
        decode_chain_batch(tiny_model, TaskKind.ARITHMETIC, [a.problem, b.problem])


def test_encode_problems_left_pads() -> None:
    ids = encode_problems([("[LIS]", "7", "<sep>")], 11)
    assert ids.shape == (1, 11)
    assert ids[0, :8].eq(VOCAB.pad_id).all()
    assert VOCAB.decode(ids[0, 8:].tolist()) == ["[LIS]", "7", "<sep>"]
