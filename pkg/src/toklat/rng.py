"""Deterministic random streams for sampling.

Path counts are arbitrary-precision integers, so we need uniform draws from
[0, n) for n far beyond 64 bits.  We build them from the raw word stream of
a counter-based generator (Philox 4x64, via numpy's BitGenerator) by
assembling fixed-width bit strings and rejecting out-of-range values.  The
raw stream is the algorithm's own output, so seeds reproduce bit-identical
draw sequences across runs and platforms.
"""

from __future__ import annotations

import numpy as np

# Recorded in estimate reports so a reader can reproduce the stream.
ALGORITHM = "philox4x64-raw"

_BLOCK = 256  # words fetched from the bit generator at a time


class RandomStream:
    """Seeded uniform source over big-integer ranges and unit doubles."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed
        self._bg = np.random.Philox(key=seed)
        self._words: list[int] = []

    def _next_word(self) -> int:
        if not self._words:
            raw = self._bg.random_raw(_BLOCK)
            # reversed so .pop() consumes in stream order
            self._words = [int(w) for w in raw[::-1]]
        return self._words.pop()

    def getrandbits(self, k: int) -> int:
        if k <= 0:
            raise ValueError("k must be positive")
        out = 0
        filled = 0
        while filled < k:
            out |= self._next_word() << filled
            filled += 64
        return out >> (filled - k) if filled > k else out

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n); exact for arbitrary-precision n."""
        if n <= 0:
            raise ValueError("n must be positive")
        k = n.bit_length()
        while True:
            r = self.getrandbits(k)
            if r < n:
                return r

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], inclusive on both ends."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.randbelow(hi - lo + 1)

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return self.getrandbits(53) * (2.0 ** -53)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
