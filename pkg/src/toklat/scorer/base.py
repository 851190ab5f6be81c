"""Autoregressive sequence scorers.

A scorer exposes a next-token log-probability distribution over its token
vocabulary plus one end-of-sequence entry (index == vocab_size, always
last).  Two access paths are instrumented separately because the whole
point of the lattice estimator is to avoid one of them:

  * `next_logprobs` / `next_logprobs_batch`: full next-token distributions,
    the generation-side interface.  Single calls are counted as sequential
    generation steps; batch calls as batched context evaluations.
  * `score_batch`: total log-probability of given sequences, the
    scoring-side interface (one teacher-forced evaluation per sequence,
    no generation).

All scorers are safe for concurrent calls; counters take a lock.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from ..errors import ValidationError
from ..rng import RandomStream
from ..vocab import Vocabulary

Context = tuple[int, ...]


@dataclass
class ScorerStats:
    sequential_next_calls: int = 0
    batched_next_contexts: int = 0
    score_requests: int = 0
    sequences_scored: int = 0

    def copy(self) -> "ScorerStats":
        return ScorerStats(
            self.sequential_next_calls,
            self.batched_next_contexts,
            self.score_requests,
            self.sequences_scored,
        )

    def since(self, earlier: "ScorerStats") -> "ScorerStats":
        return ScorerStats(
            self.sequential_next_calls - earlier.sequential_next_calls,
            self.batched_next_contexts - earlier.batched_next_contexts,
            self.score_requests - earlier.score_requests,
            self.sequences_scored - earlier.sequences_scored,
        )

    def total_model_calls(self) -> int:
        """Model-evaluation equivalents: each scored sequence is one
        teacher-forced pass, each next-token distribution one step."""
        return (
            self.sequential_next_calls
            + self.batched_next_contexts
            + self.sequences_scored
        )


class Scorer(ABC):
    """Base class handling instrumentation; subclasses implement `_impl`s."""

    name = "scorer"

    def __init__(self, vocab_size: int):
        if vocab_size < 1:
            raise ValidationError("vocab_size must be >= 1")
        self.vocab_size = vocab_size
        self.stats = ScorerStats()
        self._stats_lock = threading.Lock()

    @property
    def eos_id(self) -> int:
        return self.vocab_size

    # -- implementation hooks ------------------------------------------------

    @abstractmethod
    def _next_logprobs(self, context: Context) -> np.ndarray:
        """Log-probability vector of length vocab_size + 1 (last = eos)."""

    def _next_logprobs_batch(self, contexts: Sequence[Context]) -> list[np.ndarray]:
        return [self._next_logprobs(c) for c in contexts]

    def _score_batch(
        self, context: Context, sequences: Sequence[Sequence[int]], include_eos: bool
    ) -> list[float]:
        self._count_score_request()
        out = []
        for seq in sequences:
            total = 0.0
            ctx = list(context)
            for tid in seq:
                total += float(self._next_logprobs(tuple(ctx))[tid])
                ctx.append(tid)
            if include_eos:
                total += float(self._next_logprobs(tuple(ctx))[self.eos_id])
            out.append(total)
        return out

    # -- public, instrumented interface --------------------------------------

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        with self._stats_lock:
            self.stats.sequential_next_calls += 1
        return self._next_logprobs(tuple(context))

    def next_logprobs_batch(self, contexts: Sequence[Sequence[int]]) -> list[np.ndarray]:
        with self._stats_lock:
            self.stats.batched_next_contexts += len(contexts)
        return self._next_logprobs_batch([tuple(c) for c in contexts])

    def score_batch(
        self,
        context: Sequence[int],
        sequences: Sequence[Sequence[int]],
        include_eos: bool = False,
    ) -> list[float]:
        with self._stats_lock:
            self.stats.sequences_scored += len(sequences)
        return self._score_batch(
            tuple(context), [tuple(s) for s in sequences], include_eos
        )

    def _count_score_request(self, n: int = 1) -> None:
        with self._stats_lock:
            self.stats.score_requests += n

    def _validate_ids(self, ids: Iterable[int]) -> None:
        for tid in ids:
            if not (0 <= tid < self.vocab_size):
                raise ValidationError(
                    f"token id {tid} outside scorer vocabulary of {self.vocab_size}"
                )


def score_sequence(
    scorer: Scorer,
    context: Sequence[int],
    ids: Sequence[int],
    include_eos: bool = False,
) -> float:
    """Total log-probability of `ids` after `context` (batched, no generation)."""
    return scorer.score_batch(context, [ids], include_eos)[0]


class UniformScorer(Scorer):
    """Every next token (and eos) equally likely, always."""

    name = "uniform"

    def __init__(self, vocab_size: int):
        super().__init__(vocab_size)
        self._vec = np.full(vocab_size + 1, -math.log(vocab_size + 1))

    def _next_logprobs(self, context: Context) -> np.ndarray:
        return self._vec.copy()


class HashLM(Scorer):
    """Deterministic pseudo-LM: logits are keyed hashes of (seed, context).

    Stands in for a neural model in tests: nontrivial, context-sensitive,
    bit-reproducible everywhere.  Lower temperatures sharpen it.
    """

    name = "hash"

    def __init__(self, seed: int, vocab_size: int, temperature: float = 1.0):
        super().__init__(vocab_size)
        if temperature <= 0:
            raise ValidationError("temperature must be positive")
        self.seed = seed
        self.temperature = temperature
        self._key = struct.pack("<q", seed)

    def _next_logprobs(self, context: Context) -> np.ndarray:
        width = self.vocab_size + 1
        ctx = hashlib.blake2b(
            b"".join(struct.pack("<i", t) for t in context),
            key=self._key,
            digest_size=32,
        ).digest()
        blocks = []
        for b in range((width + 7) // 8):  # 8 uint64 per 64-byte digest
            blocks.append(
                hashlib.blake2b(ctx + struct.pack("<i", b), digest_size=64).digest()
            )
        words = np.frombuffer(b"".join(blocks), dtype="<u8")[:width]
        logits = words.astype(np.float64) * (2.0 ** -64) / self.temperature
        logits -= logits.max()
        return logits - math.log(np.exp(logits).sum())


class NGramLM(Scorer):
    """Add-k smoothed n-gram model over token ids (order 2 or 3).

    Gives tests a "realistic-shape" skewed distribution; trained tables
    round-trip through JSON.
    """

    name = "ngram"

    def __init__(
        self,
        vocab_size: int,
        order: int = 2,
        add_k: float = 0.5,
        counts: dict[Context, dict[int, int]] | None = None,
    ):
        super().__init__(vocab_size)
        if order not in (2, 3):
            raise ValidationError("order must be 2 or 3")
        if add_k <= 0:
            raise ValidationError("add_k must be positive")
        self.order = order
        self.add_k = add_k
        self.counts: dict[Context, dict[int, int]] = counts or {}
        self._totals = {key: sum(row.values()) for key, row in self.counts.items()}

    @classmethod
    def train(
        cls,
        sequences: Iterable[Sequence[int]],
        vocab_size: int,
        order: int = 2,
        add_k: float = 0.5,
    ) -> "NGramLM":
        model = cls(vocab_size, order=order, add_k=add_k)
        for seq in sequences:
            events = list(seq) + [model.eos_id]
            for i, tok in enumerate(events):
                key = tuple(events[max(0, i - (order - 1)) : i])
                row = model.counts.setdefault(key, {})
                row[tok] = row.get(tok, 0) + 1
        model._totals = {k: sum(r.values()) for k, r in model.counts.items()}
        return model

    @classmethod
    def train_from_texts(
        cls,
        vocab: Vocabulary,
        texts: Iterable[bytes],
        order: int = 2,
        add_k: float = 0.5,
    ) -> "NGramLM":
        return cls.train(
            [vocab.canonical_tokenize(t) for t in texts],
            vocab_size=len(vocab),
            order=order,
            add_k=add_k,
        )

    def _next_logprobs(self, context: Context) -> np.ndarray:
        key = tuple(context[-(self.order - 1) :]) if context else ()
        row = self.counts.get(key, {})
        total = self._totals.get(key, 0)
        width = self.vocab_size + 1
        denom = total + self.add_k * width
        probs = np.full(width, self.add_k / denom)
        for tok, c in row.items():
            probs[tok] = (c + self.add_k) / denom
        return np.log(probs)

    def to_json_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "order": self.order,
            "add_k": self.add_k,
            "counts": {
                ",".join(map(str, key)): {str(t): c for t, c in row.items()}
                for key, row in self.counts.items()
            },
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, source: str | IO[str]) -> "NGramLM":
        if isinstance(source, str):
            with open(source, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        else:
            raw = json.load(source)
        counts: dict[Context, dict[int, int]] = {}
        for key, row in raw["counts"].items():
            ctx = tuple(int(x) for x in key.split(",")) if key else ()
            counts[ctx] = {int(t): int(c) for t, c in row.items()}
        return cls(raw["vocab_size"], raw["order"], raw["add_k"], counts)


def categorical_draw(logprobs: np.ndarray, rng: RandomStream) -> int:
    """Index drawn from a normalized log-probability vector."""
    cum = np.cumsum(np.exp(logprobs))
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(idx, len(logprobs) - 1)


@dataclass(frozen=True)
class RejectionDraw:
    accepted: bool
    ids: tuple[int, ...]
    eos_terminated: bool


def rejection_sample(
    scorer: Scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    target_text: bytes,
    max_len: int,
    rng: RandomStream,
) -> RejectionDraw:
    """One unconstrained ancestral sample, accepted iff it terminates with
    eos and detokenizes to the target text."""
    ids: list[int] = []
    ctx = tuple(context)
    eos_terminated = False
    while len(ids) < max_len:
        lp = scorer.next_logprobs(ctx + tuple(ids))
        choice = categorical_draw(lp, rng)
        if choice == scorer.eos_id:
            eos_terminated = True
            break
        ids.append(choice)
    out = tuple(ids)
    accepted = False
    if eos_terminated:
        try:
            accepted = vocab.detokenize(out) == target_text
        except ValidationError:
            accepted = False  # scorer vocabulary larger than the lattice's
    return RejectionDraw(accepted=accepted, ids=out, eos_terminated=eos_terminated)
