"""Locally renormalized scorer distribution over a tokenization lattice.

At every byte position only the tokens labeling outgoing lattice arcs are
allowed; their scorer probabilities are rescaled by the surviving mass z.
The resulting sequence distribution q has the lattice paths as its exact
support, and the per-step normalizers satisfy p(t)/q(t) = prod(z_i), which
is what importance weighting needs.

When a bounded lattice is supplied, arcs whose remaining-path count under
the leftover token budget is zero are masked too, so a sample can never
dead-end against the length bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ValidationError
from ..lattice import BoundedLattice, Lattice
from ..logmath import logsumexp
from ..rng import RandomStream
from .base import Scorer, categorical_draw


@dataclass(frozen=True)
class ProxySample:
    ids: tuple[int, ...]
    log_q: float
    log_p: float
    log_normalizers: tuple[float, ...]  # log z_i per step


class ProxyDistribution:
    def __init__(
        self,
        scorer: Scorer,
        lattice: Lattice,
        bounded: BoundedLattice | None = None,
    ):
        if bounded is not None and bounded.base is not lattice:
            raise ValidationError("bounded lattice was built from a different lattice")
        if bounded is not None and bounded.num_paths() == 0:
            raise ValidationError("bounded lattice has no paths: empty support")
        self.scorer = scorer
        self.lattice = lattice
        self.bounded = bounded
        for arcs in lattice.arcs:
            for _, tid in arcs:
                scorer._validate_ids((tid,))

    @property
    def max_len(self) -> int | None:
        return self.bounded.max_len if self.bounded is not None else None

    def _allowed(self, pos: int, budget: int | None) -> list[tuple[int, int]]:
        arcs = self.lattice.arcs[pos]
        if self.bounded is None:
            return list(arcs)
        if budget is None or budget < 1:
            return []
        counts = self.bounded.counts
        return [(j, tid) for j, tid in arcs if counts[j][budget - 1] > 0]

    def contains(self, ids: Sequence[int]) -> bool:
        if self.bounded is not None:
            return self.bounded.contains(ids)
        return self.lattice.contains(ids)

    def logprob(self, context: Sequence[int], ids: Sequence[int]) -> ProxySample:
        """Exact log q of a lattice path, with per-step normalizers.

        One batched distribution lookup over all prefixes; no generation.
        """
        ids = tuple(ids)
        if not self.contains(ids):
            raise ValidationError("sequence is not a path of the proxy's lattice")
        context = tuple(context)
        prefixes = [context + ids[:i] for i in range(len(ids))]
        vectors = self.scorer.next_logprobs_batch(prefixes) if prefixes else []
        pos = 0
        budget = self.max_len
        log_p = 0.0
        log_q = 0.0
        norms = []
        for step, tid in enumerate(ids):
            allowed = self._allowed(pos, budget)
            lp = vectors[step]
            log_z = logsumexp([float(lp[a]) for _, a in allowed])
            chosen = float(lp[tid])
            log_p += chosen
            log_q += chosen - log_z
            norms.append(log_z)
            pos = next(j for j, a in allowed if a == tid)
            if budget is not None:
                budget -= 1
        return ProxySample(
            ids=ids, log_q=log_q, log_p=log_p, log_normalizers=tuple(norms)
        )

    def sample(self, context: Sequence[int], rng: RandomStream) -> ProxySample:
        """Ancestral sample restricted to lattice arcs (sequential: one
        next-token distribution per generated token)."""
        context = tuple(context)
        n = self.lattice.n
        pos = 0
        budget = self.max_len
        ids: list[int] = []
        log_p = 0.0
        log_q = 0.0
        norms: list[float] = []
        while pos < n:
            allowed = self._allowed(pos, budget)
            if not allowed:
                raise ValidationError(
                    "no arc fits the remaining token budget"
                )  # unreachable with a bounded-lattice mask
            lp = self.scorer.next_logprobs(context + tuple(ids))
            step_lp = np.array([float(lp[a]) for _, a in allowed])
            log_z = logsumexp(step_lp.tolist())
            choice = categorical_draw(step_lp - log_z, rng)
            j, tid = allowed[choice]
            ids.append(tid)
            log_p += float(lp[tid])
            log_q += float(lp[tid]) - log_z
            norms.append(log_z)
            pos = j
            if budget is not None:
                budget -= 1
        return ProxySample(
            ids=tuple(ids), log_q=log_q, log_p=log_p, log_normalizers=tuple(norms)
        )


def proxy_logprob(
    proxy: ProxyDistribution, context: Sequence[int], ids: Sequence[int]
) -> tuple[float, list[float]]:
    """Log q of a path and the per-step log-normalizers."""
    s = proxy.logprob(context, ids)
    return s.log_q, list(s.log_normalizers)


def proxy_sample(
    proxy: ProxyDistribution, context: Sequence[int], seed: int
) -> ProxySample:
    return proxy.sample(context, RandomStream(seed))
