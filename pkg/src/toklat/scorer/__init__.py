from .base import (
    HashLM,
    NGramLM,
    RejectionDraw,
    Scorer,
    ScorerStats,
    UniformScorer,
    rejection_sample,
    score_sequence,
)
from .http import HTTPScorer, http_scorer
from .proxy import ProxyDistribution, ProxySample

__all__ = [
    "HTTPScorer",
    "HashLM",
    "NGramLM",
    "ProxyDistribution",
    "ProxySample",
    "RejectionDraw",
    "Scorer",
    "ScorerStats",
    "UniformScorer",
    "http_scorer",
    "rejection_sample",
    "score_sequence",
]
