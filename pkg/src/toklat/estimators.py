"""Marginal probability estimators.

All estimators target the probability mass a scorer assigns to *every*
tokenization of a text, reported in log space.  `log_estimate` is the
non-canonical part, `log_canonical` the canonical sequence's own score,
and `log_full` their combination, except where a report's `notes` say
otherwise (rejection sampling and full-marginal importance sampling
estimate the total directly).

The default convention excludes the end-of-sequence factor; `include_eos`
switches it on (rejection sampling forces it on, since acceptance is
defined by eos termination).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ResourceLimitError, ValidationError
from .lattice import BoundedLattice, Lattice, build_lattice
from .logmath import NEG_INF, log1mexp, logaddexp, logsumexp
from .neighbors import off_by_one
from .rng import ALGORITHM, RandomStream
from .sampling import draw_distinct_indices, exclusion_indices
from .scorer import ProxyDistribution, Scorer, rejection_sample, score_sequence
from .vocab import Vocabulary

METHODS = ("canonical", "exact", "lattice", "importance", "rejection")


@dataclass
class EstimateReport:
    method: str
    log_estimate: float  # non-canonical marginal unless notes say otherwise
    log_canonical: float
    log_full: float
    k: int
    distinct_sequences: int
    max_len: int | None
    seed: int | None
    wall_time_ms: float
    scorer_calls: int
    lower_bound_certified: bool
    include_eos: bool
    support_size: int | None = None
    prng: str | None = None
    notes: str | None = None

    def to_json_dict(self, include_timing: bool = True) -> dict:
        out = {
            "method": self.method,
            "log_estimate": _json_float(self.log_estimate),
            "log_canonical": _json_float(self.log_canonical),
            "log_full": _json_float(self.log_full),
            "k": self.k,
            "distinct_sequences": self.distinct_sequences,
            "max_len": self.max_len,
            "seed": self.seed,
            "scorer_calls": self.scorer_calls,
            "lower_bound_certified": self.lower_bound_certified,
            "include_eos": self.include_eos,
            "support_size": None if self.support_size is None else str(self.support_size),
            "prng": self.prng,
            "notes": self.notes,
        }
        if include_timing:
            out["wall_time_ms"] = round(self.wall_time_ms, 3)
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_json_dict(include_timing=include_timing))


def _json_float(x: float):
    if x == NEG_INF:
        return "-inf"
    if math.isinf(x):
        return "inf"
    return x


def parse_report_float(x) -> float:
    """Inverse of the report float encoding ("-inf"/"inf" strings)."""
    if isinstance(x, str):
        return float(x)
    return float(x)


def resolve_canonical(
    vocab: Vocabulary, text: bytes, canonical: Sequence[int] | None
) -> tuple[int, ...]:
    if canonical is not None:
        canonical = tuple(canonical)
        if vocab.detokenize(canonical) != text:
            raise ValidationError(
                "supplied canonical tokenization does not detokenize to the text"
            )
        return canonical
    return vocab.canonical_tokenize(text)


class _Run:
    """Wall-clock and scorer-call bookkeeping around one estimate."""

    def __init__(self, scorer: Scorer):
        self.scorer = scorer
        self.before = scorer.stats.copy()
        self.t0 = time.perf_counter()

    def wall_ms(self) -> float:
        return (time.perf_counter() - self.t0) * 1000.0

    def calls(self) -> int:
        return self.scorer.stats.since(self.before).total_model_calls()


def estimate_canonical(
    scorer: Scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    text: bytes,
    *,
    include_eos: bool = False,
    canonical: Sequence[int] | None = None,
) -> EstimateReport:
    """Score only the canonical tokenization; no non-canonical mass."""
    run = _Run(scorer)
    canonical = resolve_canonical(vocab, text, canonical)
    log_canonical = score_sequence(scorer, context, canonical, include_eos)
    return EstimateReport(
        method="canonical",
        log_estimate=NEG_INF,
        log_canonical=log_canonical,
        log_full=log_canonical,
        k=0,
        distinct_sequences=1,
        max_len=None,
        seed=None,
        wall_time_ms=run.wall_ms(),
        scorer_calls=run.calls(),
        lower_bound_certified=False,
        include_eos=include_eos,
    )


def estimate_exact(
    scorer: Scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    text: bytes,
    *,
    limit: int = 200_000,
    include_eos: bool = False,
    canonical: Sequence[int] | None = None,
) -> EstimateReport:
    """Enumerate and score every tokenization: the ground-truth marginal."""
    run = _Run(scorer)
    canonical = resolve_canonical(vocab, text, canonical)
    lattice = build_lattice(vocab, text)
    total = lattice.num_paths()
    if total > limit:
        raise ResourceLimitError(
            f"exact marginal needs {total} sequences, more than the limit {limit}"
        )
    bounded = lattice.bound(max(lattice.n, 1))
    paths = bounded.enumerate_paths(limit)
    scores = scorer.score_batch(context, paths, include_eos)
    by_path = dict(zip(paths, scores))
    log_canonical = by_path[canonical]
    log_estimate = logsumexp(s for p, s in by_path.items() if p != canonical)
    return EstimateReport(
        method="exact",
        log_estimate=log_estimate,
        log_canonical=log_canonical,
        log_full=logaddexp(log_estimate, log_canonical),
        k=0,
        distinct_sequences=len(paths),
        max_len=None,
        seed=None,
        wall_time_ms=run.wall_ms(),
        scorer_calls=run.calls(),
        lower_bound_certified=True,
        include_eos=include_eos,
        support_size=total,
    )


def estimate_lattice(
    scorer: Scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    text: bytes,
    k: int,
    max_len: int | None = None,
    seed: int = 0,
    *,
    strict_k: bool = False,
    include_eos: bool = False,
    canonical: Sequence[int] | None = None,
) -> EstimateReport:
    """Decoding-free lower bound on the non-canonical marginal.

    Seeds the sequence set with every off-by-one split of the canonical
    tokenization, then draws uniformly without replacement from the
    remaining length-bounded lattice (canonical and off-by-one paths
    excluded by rank) until k sequences are gathered, and scores the whole
    set in batches.  No generation happens anywhere.

    k caps only the uniform stage; the off-by-one seeds are always all
    included because they are cheap and carry most of the near-canonical
    mass.  `strict_k` truncates them instead, for budget-exact comparisons
    against other estimators.  If the support runs out, the whole support
    is returned and the estimate is exact over the bounded lattice.
    """
    if k < 0:
        raise ValidationError("k must be >= 0")
    run = _Run(scorer)
    canonical = resolve_canonical(vocab, text, canonical)
    lattice = build_lattice(vocab, text)
    bound = max_len if max_len is not None else max(lattice.n, 1)
    bounded = lattice.bound(bound)

    neighborhood = (
        [m for m in off_by_one(vocab, canonical).members if len(m) <= bound]
        if canonical
        else []  # empty text: single empty tokenization, nothing to split
    )
    seeds = neighborhood[:k] if strict_k else neighborhood
    excluded = exclusion_indices(bounded, [canonical] + neighborhood)
    uniform_support = bounded.num_paths() - len(excluded)
    extra = min(max(0, k - len(seeds)), uniform_support)
    drawn = draw_distinct_indices(
        bounded.num_paths(), excluded, extra, RandomStream(seed)
    )
    sequences = seeds + [bounded.unrank(z) for z in drawn]
    # every non-canonical path the estimator could ever return; k at or
    # above this exhausts the bounded lattice and makes the bound tight
    support = bounded.num_paths() - (1 if bounded.contains(canonical) else 0)

    scores = scorer.score_batch(context, [canonical] + sequences, include_eos)
    log_canonical = scores[0]
    log_estimate = logsumexp(scores[1:])
    return EstimateReport(
        method="lattice",
        log_estimate=log_estimate,
        log_canonical=log_canonical,
        log_full=logaddexp(log_estimate, log_canonical),
        k=k,
        distinct_sequences=len(sequences),
        max_len=bound,
        seed=seed,
        wall_time_ms=run.wall_ms(),
        scorer_calls=run.calls(),
        lower_bound_certified=True,
        include_eos=include_eos,
        support_size=support,
        prng=ALGORITHM,
    )


def estimate_importance(
    scorer: Scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    text: bytes,
    k: int,
    seed: int = 0,
    *,
    exclude_canonical: bool = True,
    max_len: int | None = None,
    include_eos: bool = False,
    canonical: Sequence[int] | None = None,
) -> EstimateReport:
    """Importance sampling through the lattice-constrained proxy.

    Each of the k draws is generated token by token (sequential scorer
    calls), with importance weight p/q = prod of the per-step normalizers.
    With `exclude_canonical`, canonical draws are discarded and the
    surviving weights are rescaled by (1 - q(canonical)), which is exact
    reweighting for the proxy restricted to non-canonical paths.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    run = _Run(scorer)
    canonical = resolve_canonical(vocab, text, canonical)
    lattice = build_lattice(vocab, text)
    bounded = lattice.bound(max_len) if max_len is not None else None
    proxy = ProxyDistribution(scorer, lattice, bounded)

    log_q_canonical = None
    if exclude_canonical and proxy.contains(canonical):
        log_q_canonical = proxy.logprob(context, canonical).log_q

    rng = RandomStream(seed)
    draws = [proxy.sample(context, rng) for _ in range(k)]

    if exclude_canonical:
        kept = [d for d in draws if d.ids != canonical]
        shift = log1mexp(log_q_canonical) if log_q_canonical is not None else 0.0
        weights = [sum(d.log_normalizers) + shift for d in kept]
        log_estimate = (
            logsumexp(weights) - math.log(len(kept)) if kept else NEG_INF
        )
        notes = None
    else:
        kept = draws
        weights = [sum(d.log_normalizers) for d in draws]
        log_estimate = logsumexp(weights) - math.log(k)
        notes = "full-marginal importance estimate; canonical draws included"

    if include_eos:
        tails = scorer.next_logprobs_batch([tuple(context) + d.ids for d in kept])
        weights = [
            w + float(lp[scorer.eos_id]) for w, lp in zip(weights, tails)
        ]
        log_estimate = (
            logsumexp(weights) - math.log(len(kept)) if kept else NEG_INF
        )

    log_canonical = score_sequence(scorer, context, canonical, include_eos)
    log_full = (
        logaddexp(log_estimate, log_canonical) if exclude_canonical else log_estimate
    )
    return EstimateReport(
        method="importance",
        log_estimate=log_estimate,
        log_canonical=log_canonical,
        log_full=log_full,
        k=k,
        distinct_sequences=len({d.ids for d in kept}),
        max_len=max_len,
        seed=seed,
        wall_time_ms=run.wall_ms(),
        scorer_calls=run.calls(),
        lower_bound_certified=False,
        include_eos=include_eos,
        prng=ALGORITHM,
        notes=notes,
    )


def estimate_rejection(
    scorer: Scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    text: bytes,
    k: int,
    max_len: int,
    seed: int = 0,
    *,
    canonical: Sequence[int] | None = None,
) -> EstimateReport:
    """Acceptance-rate estimate: sample freely, accept matches of the text.

    Estimates the *full* marginal (canonical included) under the
    eos-terminated convention, which acceptance forces on; `log_full` is
    the acceptance rate itself, not a canonical + non-canonical sum.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    run = _Run(scorer)
    canonical = resolve_canonical(vocab, text, canonical)
    rng = RandomStream(seed)
    accepted = 0
    distinct: set[tuple[int, ...]] = set()
    for _ in range(k):
        draw = rejection_sample(scorer, context, vocab, text, max_len, rng)
        if draw.accepted:
            accepted += 1
            distinct.add(draw.ids)
    log_estimate = math.log(accepted / k) if accepted else NEG_INF
    log_canonical = score_sequence(scorer, context, canonical, include_eos=True)
    return EstimateReport(
        method="rejection",
        log_estimate=log_estimate,
        log_canonical=log_canonical,
        log_full=log_estimate,
        k=k,
        distinct_sequences=len(distinct),
        max_len=max_len,
        seed=seed,
        wall_time_ms=run.wall_ms(),
        scorer_calls=run.calls(),
        lower_bound_certified=False,
        include_eos=True,
        prng=ALGORITHM,
        notes="acceptance-rate estimate of the full marginal (eos convention)",
    )


def child_seed(seed: int, index: int) -> int:
    """Deterministic per-item seed derivation for multi-input runs."""
    import hashlib
    import struct

    digest = hashlib.blake2b(
        struct.pack("<qq", seed, index), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") >> 1  # keep it non-negative


def estimator_for(method: str) -> Callable:
    try:
        return {
            "canonical": estimate_canonical,
            "exact": estimate_exact,
            "lattice": estimate_lattice,
            "importance": estimate_importance,
            "rejection": estimate_rejection,
        }[method]
    except KeyError:
        raise ValidationError(
            f"unknown method {method!r}; expected one of {METHODS}"
        ) from None


def choose(
    scorer: Scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    candidates: Sequence[bytes],
    method: str = "lattice",
    *,
    canonicals: Sequence[Sequence[int] | None] | None = None,
    seed: int | None = None,
    **params,
) -> tuple[int, list[EstimateReport]]:
    """Pick the candidate text with the highest estimated probability.

    Ties break to the lowest index.  Sampling methods get a distinct
    deterministic child seed per candidate.
    """
    if not candidates:
        raise ValidationError("need at least one candidate")
    estimator = estimator_for(method)
    reports = []
    for i, text in enumerate(candidates):
        kwargs = dict(params)
        if canonicals is not None and canonicals[i] is not None:
            kwargs["canonical"] = canonicals[i]
        if method in ("lattice", "importance", "rejection"):
            kwargs["seed"] = child_seed(seed or 0, i)
        reports.append(estimator(scorer, context, vocab, text, **kwargs))
    best = 0
    for i in range(1, len(reports)):
        if reports[i].log_full > reports[best].log_full:
            best = i
    return best, reports
