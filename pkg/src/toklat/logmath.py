"""Log-domain accumulation helpers.

All marginal arithmetic in this package happens in log space: linear-domain
products of hundreds of token probabilities underflow IEEE doubles long
before the texts get interesting.
"""

from __future__ import annotations

import math
from typing import Iterable

NEG_INF = float("-inf")


def logaddexp(a: float, b: float) -> float:
    """log(exp(a) + exp(b)) without leaving log space."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def logsumexp(values: Iterable[float]) -> float:
    """log(sum(exp(v))) over an iterable; -inf for an empty one."""
    vals = list(values)
    if not vals:
        return NEG_INF
    hi = max(vals)
    if hi == NEG_INF:
        return NEG_INF
    if math.isinf(hi):  # +inf dominates
        return hi
    return hi + math.log(math.fsum(math.exp(v - hi) for v in vals))


def log1mexp(x: float) -> float:
    """log(1 - exp(x)) for x < 0; -inf when x == 0."""
    if x > 0:
        raise ValueError(f"log1mexp requires x <= 0, got {x}")
    if x == 0:
        return NEG_INF
    # standard split at log(1/2) for accuracy
    if x > -math.log(2):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))
