"""Right-aligned round targets for iteration-wise supervision.

Each reasoning round is placed at the right edge of a fixed-width window
(the width is the maximum of the problem length and the longest round),
with the left side filled by <pad>.  The supervision mask selects the
round tokens plus the final pad, which marks the boundary; everything to
the left of that pad is ignored by the loss and by decoding.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus.samples import Sample, TaskKind
from .corpus.vocab import PAD
from .corpus.lis import GROUP


@dataclass(frozen=True)
class AlignmentTarget:
    """One iteration's target window.

    `pad_boundary` is the index of the last pad (None when the round fills
    the whole window); mask[i] = 1 iff i == pad_boundary or tokens[i] is a
    round token.
    """

    tokens: tuple[str, ...]
    mask: tuple[int, ...]
    pad_boundary: int | None


class AlignmentError(ValueError):
    """A round does not fit its window (corpus bug)."""


def right_align(round_tokens: tuple[str, ...] | list[str], width: int) -> AlignmentTarget:
    fill = width - len(round_tokens)
    if fill < 0:
        raise AlignmentError(
            f"round of {len(round_tokens)} tokens exceeds window width {width}"
        )
    tokens = (PAD,) * fill + tuple(round_tokens)
    if fill == 0:
        mask = (1,) * width
        boundary = None
    else:
        boundary = fill - 1
        mask = tuple(1 if (i == boundary or i >= fill) else 0 for i in range(width))
    return AlignmentTarget(tokens=tokens, mask=mask, pad_boundary=boundary)


def target_width(sample: Sample) -> int:
    """Window width: max of problem length and longest round."""
    return max(len(sample.problem), max(len(r) for r in sample.rounds))


def inference_width(task: TaskKind, problem_len: int) -> int:
    """Window width computable from the problem alone (no rounds yet).

    Arithmetic and ED rounds are always shorter than their problems; LIS
    rounds are fixed at GROUP+1 tokens, which can exceed tiny problems.
    """
    if task is TaskKind.LIS:
        return max(problem_len, GROUP + 1)
    return problem_len


def build_alignment(sample: Sample) -> list[AlignmentTarget]:
    """Per-iteration targets for a sample; length equals its complexity."""
    width = target_width(sample)
    return [right_align(r, width) for r in sample.rounds]


def decode_aligned(predicted: list[str] | tuple[str, ...]) -> tuple[list[str], bool]:
    """Recover a round from a predicted window.

    The round is everything right of the last predicted pad (the whole
    window if no pad was predicted).  A pad appearing right of a non-pad
    token marks the round malformed; the tokens right of the last pad are
    still returned.
    """
    last_pad = -1
    for i, tok in enumerate(predicted):
        if tok == PAD:
            last_pad = i
    round_tokens = list(predicted[last_pad + 1 :])
    malformed = any(tok != PAD for tok in predicted[: max(last_pad, 0)])
    return round_tokens, malformed
