"""Comparative studies over estimators: underestimation ratio, rank
correlation between the scorer and its lattice-constrained proxy, and
scoring-vs-generation cost."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from typing import IO, Sequence

from .errors import ValidationError
from .estimators import (
    EstimateReport,
    child_seed,
    estimate_importance,
    estimate_lattice,
    resolve_canonical,
)
from .lattice import build_lattice
from .rng import RandomStream
from .scorer import ProxyDistribution, Scorer
from .vocab import Vocabulary


@dataclass
class ComparisonRecord:
    input_id: str
    reports: dict[str, EstimateReport] = field(default_factory=dict)
    underestimated: bool | None = None
    spearman_rho: float | None = None

    def to_json_dict(self, include_timing: bool = True) -> dict:
        return {
            "input_id": self.input_id,
            "reports": {
                m: r.to_json_dict(include_timing=include_timing)
                for m, r in self.reports.items()
            },
            "underestimated": self.underestimated,
            "spearman_rho": self.spearman_rho,
        }


def _average_ranks(xs: Sequence[float]) -> list[float]:
    n = len(xs)
    order = sorted(range(n), key=lambda i: xs[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1  # ranks are 1-based
        for pos in range(i, j + 1):
            ranks[order[pos]] = avg
        i = j + 1
    return ranks


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(xs) != len(ys):
        raise ValidationError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValidationError("need at least two points")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0 or vy == 0:
        raise ValidationError("undefined correlation: constant input")
    return cov / math.sqrt(vx * vy)


@dataclass
class UnderestimationSummary:
    records: list[ComparisonRecord]
    underestimated_pct: float
    k: int
    max_len: int | None

    def to_json_dict(self) -> dict:
        return {
            "study": "underestimation",
            "num_inputs": len(self.records),
            "underestimated_pct": self.underestimated_pct,
            "k": self.k,
            "max_len": self.max_len,
        }


def underestimation_study(
    inputs: Sequence[tuple[Sequence[int], bytes]],
    scorer: Scorer,
    vocab: Vocabulary,
    k: int,
    max_len: int | None,
    seed: int,
    include_eos: bool = False,
) -> UnderestimationSummary:
    """How often does importance sampling land below the certified lattice
    lower bound, at the same sample count?"""
    if not inputs:
        raise ValidationError("need at least one input")
    records = []
    for i, (context, text) in enumerate(inputs):
        s = child_seed(seed, i)
        lattice_report = estimate_lattice(
            scorer, context, vocab, text, k=k, max_len=max_len, seed=s,
            strict_k=True, include_eos=include_eos,
        )
        is_report = estimate_importance(
            scorer, context, vocab, text, k=k, max_len=max_len, seed=s,
            include_eos=include_eos,
        )
        records.append(
            ComparisonRecord(
                input_id=str(i),
                reports={"lattice": lattice_report, "importance": is_report},
                underestimated=is_report.log_full < lattice_report.log_full,
            )
        )
    pct = 100.0 * sum(r.underestimated for r in records) / len(records)
    return UnderestimationSummary(
        records=records, underestimated_pct=pct, k=k, max_len=max_len
    )


def pq_ranking_study(
    scorer: Scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    text: bytes,
    num_sequences: int,
    seed: int,
    max_len: int | None = None,
) -> float:
    """Spearman correlation between scorer and proxy log-probabilities over
    a set of unique tokenizations (proxy-sampled, deduplicated; the whole
    path set if the lattice is smaller than the quota)."""
    lattice = build_lattice(vocab, text)
    bounded = lattice.bound(max_len) if max_len is not None else None
    proxy = ProxyDistribution(scorer, lattice, bounded)
    total = bounded.num_paths() if bounded is not None else lattice.num_paths()

    log_p: list[float] = []
    log_q: list[float] = []
    if total <= num_sequences:
        enum = (bounded or lattice.bound(max(lattice.n, 1))).iter_paths()
        for ids in enum:
            s = proxy.logprob(context, ids)
            log_p.append(s.log_p)
            log_q.append(s.log_q)
    else:
        rng = RandomStream(seed)
        seen: set[tuple[int, ...]] = set()
        attempts = 0
        cap = max(1000, 50 * num_sequences)
        while len(seen) < num_sequences and attempts < cap:
            attempts += 1
            s = proxy.sample(context, rng)
            if s.ids in seen:
                continue
            seen.add(s.ids)
            log_p.append(s.log_p)
            log_q.append(s.log_q)
    return spearman_rho(log_p, log_q)


@dataclass
class TimingResult:
    n: int
    k: int
    score_ms: float
    gen_ms: float
    speedup: float
    score_calls: int
    gen_steps: int

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "score_ms": round(self.score_ms, 3),
            "gen_ms": round(self.gen_ms, 3),
            "speedup": round(self.speedup, 4),
            "score_calls": self.score_calls,
            "gen_steps": self.gen_steps,
        }


def timing_study(
    scorer: Scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    text: bytes,
    k: int,
    max_len: int | None,
    seed: int,
) -> TimingResult:
    """Wall time of scoring k lattice samples vs generating k proxy samples."""
    canonical = resolve_canonical(vocab, text, None)

    before = scorer.stats.copy()
    t0 = time.perf_counter()
    estimate_lattice(
        scorer, context, vocab, text, k=k, max_len=max_len, seed=seed,
        canonical=canonical,
    )
    score_ms = (time.perf_counter() - t0) * 1000.0
    score_delta = scorer.stats.since(before)
    assert score_delta.sequential_next_calls == 0  # decoding-free by design

    lattice = build_lattice(vocab, text)
    bounded = lattice.bound(max_len) if max_len is not None else None
    proxy = ProxyDistribution(scorer, lattice, bounded)
    rng = RandomStream(seed)
    before = scorer.stats.copy()
    t0 = time.perf_counter()
    for _ in range(k):
        proxy.sample(context, rng)
    gen_ms = (time.perf_counter() - t0) * 1000.0
    gen_delta = scorer.stats.since(before)

    return TimingResult(
        n=len(text),
        k=k,
        score_ms=score_ms,
        gen_ms=gen_ms,
        speedup=gen_ms / score_ms if score_ms > 0 else float("inf"),
        score_calls=score_delta.total_model_calls(),
        gen_steps=gen_delta.sequential_next_calls,
    )


def write_jsonl(records: list[dict], fh: IO[str]) -> None:
    for rec in records:
        fh.write(json.dumps(rec) + "\n")


def write_csv(rows: list[dict], fh: IO[str]) -> None:
    if not rows:
        return
    writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
