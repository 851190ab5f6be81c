"""Tokenization lattices: every way to segment a byte string into tokens.

A lattice is a DAG whose states are byte positions 0..n of the text and
whose arcs (i -> j, token) are vocabulary tokens matching text[i:j].  Its
paths from 0 to n are exactly the tokenizations of the text, so path
counting, enumeration, ranking and unranking all reduce to one big-integer
table per lattice.  Construction probes substrings directly (hash lookups
up to the longest token length), which yields the same automaton as the
transducer-composition definition without an FST library.

Path counts grow exponentially (Fibonacci-like already for a two-token
vocabulary), hence plain Python integers everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import ResourceLimitError, ValidationError
from .vocab import Vocabulary

Arc = tuple[int, int]  # (target position, token id)


@dataclass(frozen=True)
class Lattice:
    vocab: Vocabulary
    text: bytes
    arcs: tuple[tuple[Arc, ...], ...]  # arcs[i], sorted by token id
    counts: tuple[int, ...]  # counts[i] = number of paths i -> n

    @property
    def n(self) -> int:
        return len(self.text)

    def num_paths(self) -> int:
        return self.counts[0]

    def contains(self, ids: Sequence[int]) -> bool:
        """True iff `ids` labels a path from position 0 to n."""
        pos = 0
        for tid in ids:
            nxt = None
            for j, a in self.arcs[pos]:
                if a == tid:
                    nxt = j
                    break
            if nxt is None:
                return False
            pos = nxt
        return pos == self.n

    def bound(self, max_len: int) -> "BoundedLattice":
        return bound_length(self, max_len)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "arcs": [
                [i, j, tid] for i in range(self.n) for (j, tid) in self.arcs[i]
            ],
            "num_paths": str(self.num_paths()),
        }


def build_lattice(vocab: Vocabulary, text: bytes) -> Lattice:
    """Build the lattice of all tokenizations of `text` under `vocab`.

    O(n * m) substring probes for text length n and longest token m.  Every
    position has at least one outgoing single-byte arc (alphabet
    completeness), so the lattice always has at least one path.
    """
    if isinstance(text, str):
        raise TypeError("text must be bytes")
    vocab.check_text(text)
    n = len(text)
    lookup = vocab.token_to_id
    arcs: list[tuple[Arc, ...]] = []
    for i in range(n):
        here = []
        for j in range(i + 1, min(i + vocab.max_token_len, n) + 1):
            tid = lookup.get(text[i:j])
            if tid is not None:
                here.append((j, tid))
        here.sort(key=lambda arc: arc[1])
        arcs.append(tuple(here))

    counts = [0] * (n + 1)
    counts[n] = 1
    for i in range(n - 1, -1, -1):
        counts[i] = sum(counts[j] for j, _ in arcs[i])
    return Lattice(vocab=vocab, text=text, arcs=tuple(arcs), counts=tuple(counts))


def count_paths(lattice: Lattice) -> int:
    return lattice.num_paths()


@dataclass(frozen=True)
class BoundedLattice:
    """A lattice restricted to paths of at most `max_len` tokens.

    Only a counting table over (position, remaining token budget) is
    materialized, never a product automaton: counts[i][r] is the number of
    paths from position i to n that use at most r arcs.
    """

    base: Lattice
    max_len: int
    counts: tuple[tuple[int, ...], ...]

    @property
    def vocab(self) -> Vocabulary:
        return self.base.vocab

    @property
    def text(self) -> bytes:
        return self.base.text

    def num_paths(self) -> int:
        return self.counts[0][self.max_len]

    def contains(self, ids: Sequence[int]) -> bool:
        return len(ids) <= self.max_len and self.base.contains(ids)

    def unrank(self, index: int) -> tuple[int, ...]:
        """The index-th path (1-based) in lexicographic-by-token-id order.

        Descends the DAG, at each state skipping over the completion counts
        of earlier arcs until the index falls inside one arc's block.
        """
        total = self.num_paths()
        if not 1 <= index <= total:
            raise ValidationError(f"path index {index} out of range [1, {total}]")
        n = self.base.n
        pos, budget = 0, self.max_len
        out = []
        while pos < n:
            for j, tid in self.base.arcs[pos]:
                c = self.counts[j][budget - 1] if budget >= 1 else 0
                if index <= c:
                    out.append(tid)
                    pos, budget = j, budget - 1
                    break
                index -= c
            else:  # counts guarantee some arc absorbs the index
                raise AssertionError("unrank descended into a dead state")
        return tuple(out)

    def rank(self, ids: Sequence[int]) -> int:
        """Exact inverse of `unrank`."""
        if len(ids) > self.max_len:
            raise ValidationError(
                f"sequence of {len(ids)} tokens exceeds the bound {self.max_len}"
            )
        n = self.base.n
        pos, budget = 0, self.max_len
        index = 1
        for tid in ids:
            nxt = None
            for j, a in self.base.arcs[pos]:
                if a == tid:
                    nxt = j
                    break
                index += self.counts[j][budget - 1]
            if nxt is None:
                raise ValidationError(
                    f"token id {tid} does not label an arc at position {pos}"
                )
            pos, budget = nxt, budget - 1
        if pos != n:
            raise ValidationError("sequence stops before the end of the text")
        return index

    def iter_paths(self) -> Iterator[tuple[int, ...]]:
        """All paths in rank order."""
        n = self.base.n
        arcs = self.base.arcs
        counts = self.counts

        def rec(pos: int, budget: int, prefix: list[int]) -> Iterator[tuple[int, ...]]:
            if pos == n:
                yield tuple(prefix)
                return
            if budget == 0:
                return
            for j, tid in arcs[pos]:
                if counts[j][budget - 1] > 0:
                    prefix.append(tid)
                    yield from rec(j, budget - 1, prefix)
                    prefix.pop()

        yield from rec(0, self.max_len, [])

    def enumerate_paths(self, limit: int) -> list[tuple[int, ...]]:
        total = self.num_paths()
        if total > limit:
            raise ResourceLimitError(
                f"lattice has {total} paths, more than the limit {limit}"
            )
        return list(self.iter_paths())


def bound_length(lattice: Lattice, max_len: int) -> BoundedLattice:
    if max_len < 0:
        raise ValidationError("max_len must be >= 0")
    n = lattice.n
    table: list[tuple[int, ...]] = [()] * (n + 1)
    table[n] = tuple([1] * (max_len + 1))
    for i in range(n - 1, -1, -1):
        row = [0] * (max_len + 1)
        for r in range(1, max_len + 1):
            row[r] = sum(table[j][r - 1] for j, _ in lattice.arcs[i])
        table[i] = tuple(row)
    return BoundedLattice(base=lattice, max_len=max_len, counts=tuple(table))
