"""Fixed token vocabulary shared by all tasks and models.

Every integer in [0, 299] is a single token, so every task answer fits in
one token.  Layout: control tokens first (<pad> is pinned to id 0), then
the three task tags, then numbers, letters, operators and delimiters.
"""

from __future__ import annotations

from dataclasses import dataclass

PAD = "<pad>"
EOS = "<eos>"
SEP = "<sep>"

TAG_ARI = "[ARI]"
TAG_ED = "[ED]"
TAG_LIS = "[LIS]"
TASK_TAGS = (TAG_ARI, TAG_ED, TAG_LIS)

MAX_NUMBER = 299
LETTERS = tuple("abcdefghijklmnopqrstuvwxyz")
OPERATORS = ("+", "-", "×", "÷", "(", ")", "=")
DELIMITERS = ("|", ",", SEP)


class VocabError(ValueError):
    """Raised when a surface form is not part of the vocabulary."""


@dataclass(frozen=True)
class Token:
    """One vocabulary entry: integer id plus its rendered surface form."""

    id: int
    surface: str


class Vocabulary:
    """Ordered, immutable surface <-> id mapping."""

    def __init__(self) -> None:
        surfaces = [PAD, EOS]
        surfaces.extend(TASK_TAGS)
        surfaces.extend(str(i) for i in range(MAX_NUMBER + 1))
        surfaces.extend(LETTERS)
        surfaces.extend(OPERATORS)
        surfaces.extend(DELIMITERS)
        if len(set(surfaces)) != len(surfaces):
            raise VocabError("duplicate surface in vocabulary definition")
        self._surfaces = tuple(surfaces)
        self._ids = {s: i for i, s in enumerate(surfaces)}
        self.pad_id = self._ids[PAD]
        self.eos_id = self._ids[EOS]

    def __len__(self) -> int:
        return len(self._surfaces)

    def __contains__(self, surface: str) -> bool:
        return surface in self._ids

    def id_of(self, surface: str) -> int:
        try:
            return self._ids[surface]
        except KeyError:
            raise VocabError(f"unknown token surface: {surface!r}") from None

    def surface_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._surfaces):
            raise VocabError(f"token id {token_id} out of range")
        return self._surfaces[token_id]

    def token(self, surface: str) -> Token:
        return Token(self.id_of(surface), surface)

    def encode(self, surfaces: list[str] | tuple[str, ...]) -> list[int]:
        return [self.id_of(s) for s in surfaces]

    def decode(self, ids: list[int] | tuple[int, ...]) -> list[str]:
        return [self.surface_of(i) for i in ids]

    @property
    def surfaces(self) -> tuple[str, ...]:
        return self._surfaces


# The token set is fixed by the task definitions, so one shared instance
# serves the whole package.
VOCAB = Vocabulary()
