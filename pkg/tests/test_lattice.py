import random

import pytest

from toklat import (
    ResourceLimitError,
    ValidationError,
    build_lattice,
    count_paths,
    make_vocabulary,
)

import oracles


def test_two_paths_ab(vocab_ab):
    lattice = build_lattice(vocab_ab, b"ab")
    assert lattice.num_paths() == 2
    a, b, ab = (vocab_ab.id_of(t) for t in (b"a", b"b", b"ab"))
    assert set(lattice.bound(2).iter_paths()) == {(a, b), (ab,)}


def test_fibonacci_counts(vocab_aa):
    assert build_lattice(vocab_aa, b"a" * 10).num_paths() == 89
    assert build_lattice(vocab_aa, b"a" * 4).num_paths() == 5


def test_single_path():
    v = make_vocabulary(["a"])
    assert build_lattice(v, b"aaaa").num_paths() == 1


def test_big_integer_path_count(vocab_aa):
    n = build_lattice(vocab_aa, b"a" * 300).num_paths()
    assert n == oracles.fibonacci(301)
    assert len(str(n)) == 63


def test_counts_match_recurrence(vocab_aa):
    lattice = build_lattice(vocab_aa, b"a" * 12)
    assert lattice.counts[lattice.n] == 1
    for i in range(lattice.n):
        assert lattice.counts[i] == sum(lattice.counts[j] for j, _ in lattice.arcs[i])


def test_out_degree_bounded():
    rng = random.Random(7)
    for _ in range(20):
        v = make_vocabulary(oracles.random_vocab(rng, "ab", extra_tokens=6))
        lattice = build_lattice(v, oracles.random_text(rng, "ab", 16))
        assert all(len(arcs) <= v.max_token_len for arcs in lattice.arcs)


def test_count_matches_bruteforce_enumeration():
    rng = random.Random(2024)
    for _ in range(30):
        v = make_vocabulary(oracles.random_vocab(rng, "ab", extra_tokens=5))
        text = oracles.random_text(rng, "ab", 12)
        lattice = build_lattice(v, text)
        segs = oracles.segmentations(v, text)
        assert lattice.num_paths() == len(segs)
        assert len(set(segs)) == len(segs)


def test_enumeration_order_is_lexicographic_by_token_id():
    rng = random.Random(5)
    for _ in range(15):
        v = make_vocabulary(oracles.random_vocab(rng, "ab", extra_tokens=4))
        text = oracles.random_text(rng, "ab", 10)
        lattice = build_lattice(v, text)
        bounded = lattice.bound(max(lattice.n, 1))
        assert list(bounded.iter_paths()) == sorted(oracles.segmentations(v, text))


def test_bound_length_counting(vocab_aa):
    lattice = build_lattice(vocab_aa, b"aaa")
    assert lattice.bound(2).num_paths() == 2  # [aa,a] and [a,aa]
    assert lattice.bound(3).num_paths() == lattice.num_paths()
    assert lattice.bound(0).num_paths() == 0
    assert lattice.bound(17).num_paths() == lattice.num_paths()


def test_bound_length_matches_bruteforce(vocab_aa):
    lattice = build_lattice(vocab_aa, b"a" * 9)
    segs = oracles.segmentations(vocab_aa, b"a" * 9)
    for bound in range(0, 11):
        assert lattice.bound(bound).num_paths() == sum(
            1 for s in segs if len(s) <= bound
        )


def test_unrank_first_and_last(vocab_ab):
    bounded = build_lattice(vocab_ab, b"ab").bound(2)
    a, b, ab = (vocab_ab.id_of(t) for t in (b"a", b"b", b"ab"))
    assert bounded.unrank(1) == (a, b)  # id(a) < id(ab): byte split ranks first
    assert bounded.unrank(bounded.num_paths()) == (ab,)
    with pytest.raises(ValidationError, match="out of range"):
        bounded.unrank(0)
    with pytest.raises(ValidationError, match="out of range"):
        bounded.unrank(3)


def test_rank_examples(vocab_ab):
    bounded = build_lattice(vocab_ab, b"ab").bound(2)
    a, b = vocab_ab.id_of(b"a"), vocab_ab.id_of(b"b")
    assert bounded.rank((a, b)) == 1
    with pytest.raises(ValidationError):
        bounded.rank((b, a))  # not a path
    with pytest.raises(ValidationError, match="exceeds the bound"):
        bounded.rank((a, b, a))


def test_rank_unrank_bijection():
    rng = random.Random(31)
    checked = 0
    while checked < 12:
        v = make_vocabulary(oracles.random_vocab(rng, "ab", extra_tokens=5))
        text = oracles.random_text(rng, "ab", 13)
        lattice = build_lattice(v, text)
        bound = rng.choice([lattice.n, max(1, lattice.n // 2)])
        bounded = lattice.bound(max(bound, 1))
        total = bounded.num_paths()
        if not 1 <= total <= 1000:
            continue
        checked += 1
        paths = [bounded.unrank(i) for i in range(1, total + 1)]
        assert len(set(paths)) == total
        assert all(bounded.rank(p) == i + 1 for i, p in enumerate(paths))
        assert paths == list(bounded.iter_paths())


def test_enumerate_respects_limit(vocab_aa):
    bounded = build_lattice(vocab_aa, b"a" * 10).bound(10)
    with pytest.raises(ResourceLimitError):
        bounded.enumerate_paths(3)
    assert len(bounded.enumerate_paths(89)) == 89


def test_paths_detokenize_to_text():
    rng = random.Random(8)
    for _ in range(10):
        v = make_vocabulary(oracles.random_vocab(rng, "ab", extra_tokens=4))
        text = oracles.random_text(rng, "ab", 10)
        bounded = build_lattice(v, text).bound(max(len(text), 1))
        for path in bounded.iter_paths():
            assert v.detokenize(path) == text


def test_contains(vocab_ab):
    lattice = build_lattice(vocab_ab, b"ba")
    assert not lattice.contains((vocab_ab.id_of(b"ab"),))
    assert lattice.contains((vocab_ab.id_of(b"b"), vocab_ab.id_of(b"a")))
    empty = build_lattice(vocab_ab, b"")
    assert empty.contains(())
    assert empty.num_paths() == 1


def test_count_monotone_in_vocabulary():
    rng = random.Random(64)
    for _ in range(20):
        tokens = oracles.random_vocab(rng, "ab", extra_tokens=4)
        text = oracles.random_text(rng, "ab", 12)
        base = count_paths(build_lattice(make_vocabulary(tokens), text))
        extra = oracles.random_vocab(rng, "ab", extra_tokens=5)
        grown = make_vocabulary(list(dict.fromkeys(tokens + extra)))
        assert count_paths(build_lattice(grown, text)) >= base


def test_lattice_json_dump(vocab_ab):
    dump = build_lattice(vocab_ab, b"ab").to_json_dict()
    assert dump["n"] == 2
    assert dump["num_paths"] == "2"
    assert sorted(dump["arcs"]) == sorted(
        [[0, 1, 0], [0, 2, 2], [1, 2, 1]]
    )
