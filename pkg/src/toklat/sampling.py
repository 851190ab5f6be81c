"""Uniform sampling of lattice paths via their integer ranks.

Paths are identified with indices 1..N in rank order, so uniform path
sampling is uniform integer sampling plus unranking, and excluding a path
set means excluding its ranks: no automaton complement, no
resample-until-miss, exact without-replacement semantics.

Distinct indices come from a single seeded stream: rejection sampling of
big integers while it is cheap, switching to enumeration of the remaining
support once more than half of it has been drawn.  For a fixed seed the
first j draws are identical whatever k is, so sample sets are nested in k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ValidationError
from .lattice import BoundedLattice
from .rng import RandomStream


@dataclass(frozen=True)
class SampleSpec:
    k: int
    seed: int
    max_len: int | None = None  # None: inherit the lattice bound
    exclude: tuple[tuple[int, ...], ...] = field(default_factory=tuple)
    with_replacement: bool = False

    def __post_init__(self):
        if self.k < 0:
            raise ValidationError("k must be >= 0")
        if self.max_len is not None and self.max_len < 1:
            raise ValidationError("max_len must be >= 1")


def exclusion_indices(
    bounded: BoundedLattice, exclude: Iterable[Sequence[int]]
) -> frozenset[int]:
    """Ranks of the excluded paths that actually lie in the bounded lattice.

    Sequences that are not paths, or that exceed the length bound, are
    skipped: they contribute nothing to the support either way.
    """
    out = set()
    for t in exclude:
        t = tuple(t)
        if bounded.contains(t):
            out.add(bounded.rank(t))
    return frozenset(out)


def draw_distinct_indices(
    total: int, excluded: frozenset[int], k: int, rng: RandomStream
) -> list[int]:
    """k distinct uniform indices from [1, total] minus `excluded`.

    The draw sequence depends only on (total, excluded, rng stream), never
    on k, so a longer run extends a shorter one.
    """
    support = total - len(excluded)
    if k > support:
        raise ValidationError(
            f"cannot draw {k} distinct paths from a support of {support}"
        )
    drawn: list[int] = []
    taken: set[int] = set()
    pool: list[int] | None = None
    while len(drawn) < k:
        if pool is None and 2 * len(drawn) >= support:
            # rejection now wastes >= half its draws; at this point the
            # remaining support is small enough to materialize (<= 2k)
            pool = [
                z
                for z in range(1, total + 1)
                if z not in excluded and z not in taken
            ]
        if pool is not None:
            i = rng.randbelow(len(pool))
            pool[i], pool[-1] = pool[-1], pool[i]
            drawn.append(pool.pop())
        else:
            z = rng.randint(1, total)
            if z in excluded or z in taken:
                continue
            taken.add(z)
            drawn.append(z)
    return drawn


def sample_uniform(
    bounded: BoundedLattice, spec: SampleSpec
) -> list[tuple[int, ...]]:
    """Uniform paths from the bounded lattice minus the excluded ones.

    With replacement: i.i.d. uniform over the support.  Without: a uniform
    k-subset, each path at most once.  Deterministic given the seed.
    """
    if spec.max_len is not None and spec.max_len != bounded.max_len:
        raise ValidationError(
            f"spec max_len {spec.max_len} does not match lattice bound "
            f"{bounded.max_len}"
        )
    total = bounded.num_paths()
    excluded = exclusion_indices(bounded, spec.exclude)
    support = total - len(excluded)
    if spec.k == 0:
        return []
    if support <= 0:
        raise ValidationError("sampling support is empty")
    rng = RandomStream(spec.seed)
    if spec.with_replacement:
        indices = []
        while len(indices) < spec.k:
            z = rng.randint(1, total)
            if z not in excluded:
                indices.append(z)
    else:
        indices = draw_distinct_indices(total, excluded, spec.k, rng)
    return [bounded.unrank(z) for z in indices]
