"""toklat: tokenization lattices and decoding-free marginal estimation.

Encode every tokenization of a byte string as a position-indexed DAG,
count/enumerate/rank/sample its paths exactly, and estimate the marginal
probability a subword language model assigns to the text (rather than to
one tokenization of it) without ever generating from the model.
"""

from .analysis import ComparisonRecord, pq_ranking_study, spearman_rho, timing_study, underestimation_study
from .errors import (
    ResourceLimitError,
    ScorerConnectionError,
    ScorerError,
    ScorerProtocolError,
    TokLatError,
    ValidationError,
)
from .estimators import (
    EstimateReport,
    choose,
    estimate_canonical,
    estimate_exact,
    estimate_importance,
    estimate_lattice,
    estimate_rejection,
)
from .lattice import BoundedLattice, Lattice, bound_length, build_lattice, count_paths
from .neighbors import OffByOneSet, decompose, off_by_one
from .rng import RandomStream
from .sampling import SampleSpec, exclusion_indices, sample_uniform
from .scorer import (
    HTTPScorer,
    HashLM,
    NGramLM,
    ProxyDistribution,
    ProxySample,
    Scorer,
    UniformScorer,
    rejection_sample,
    score_sequence,
)
from .vocab import Vocabulary, load_vocabulary, make_vocabulary

__version__ = "0.1.0"

__all__ = [
    "BoundedLattice",
    "ComparisonRecord",
    "EstimateReport",
    "HTTPScorer",
    "HashLM",
    "Lattice",
    "NGramLM",
    "OffByOneSet",
    "ProxyDistribution",
    "ProxySample",
    "RandomStream",
    "ResourceLimitError",
    "SampleSpec",
    "Scorer",
    "ScorerConnectionError",
    "ScorerError",
    "ScorerProtocolError",
    "TokLatError",
    "UniformScorer",
    "ValidationError",
    "Vocabulary",
    "bound_length",
    "build_lattice",
    "choose",
    "count_paths",
    "decompose",
    "estimate_canonical",
    "estimate_exact",
    "estimate_importance",
    "estimate_lattice",
    "estimate_rejection",
    "exclusion_indices",
    "load_vocabulary",
    "make_vocabulary",
    "off_by_one",
    "pq_ranking_study",
    "rejection_sample",
    "sample_uniform",
    "score_sequence",
    "spearman_rho",
    "timing_study",
    "underestimation_study",
]
