"""Off-by-one neighborhoods of a canonical tokenization.

An off-by-one tokenization replaces exactly one canonical token with an
ordered pair of vocabulary tokens that concatenates to it, so every member
is one token longer than the canonical sequence.  For a canonical sequence
of n tokens and a longest token of m bytes there are at most m*n members,
which makes full enumeration cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ValidationError
from .vocab import Vocabulary


def decompose(vocab: Vocabulary, token_id: int) -> list[tuple[int, int]]:
    """All ordered token pairs whose concatenation equals this token.

    Ordered by split position ascending.  Single-byte tokens decompose to
    nothing.
    """
    if not (0 <= token_id < len(vocab)):
        raise ValidationError(f"unknown token-id {token_id!r}")
    b = vocab.tokens[token_id]
    out = []
    for split in range(1, len(b)):
        left = vocab.token_to_id.get(b[:split])
        right = vocab.token_to_id.get(b[split:])
        if left is not None and right is not None:
            out.append((left, right))
    return out


@dataclass(frozen=True)
class OffByOneSet:
    canonical: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]


def off_by_one(vocab: Vocabulary, canonical: Sequence[int]) -> OffByOneSet:
    """Enumerate all off-by-one tokenizations of `canonical`.

    Deterministic order: canonical token index ascending, then split
    position ascending.  Distinct (index, split) choices provably produce
    distinct sequences (a collision would force an empty token), which the
    seen-set assertion documents.
    """
    canonical = tuple(canonical)
    if not canonical:
        raise ValidationError("canonical tokenization must be non-empty")
    members: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    for i, tid in enumerate(canonical):
        for left, right in decompose(vocab, tid):
            seq = canonical[:i] + (left, right) + canonical[i + 1 :]
            assert seq not in seen, "distinct splits produced an identical sequence"
            seen.add(seq)
            members.append(seq)
    return OffByOneSet(canonical=canonical, members=tuple(members))
