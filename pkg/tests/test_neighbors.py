import random

import pytest

from toklat import (
    ValidationError,
    build_lattice,
    decompose,
    make_vocabulary,
    off_by_one,
)

import oracles


def test_decompose_single_byte(vocab_ab):
    assert decompose(vocab_ab, vocab_ab.id_of(b"a")) == []


def test_decompose_pair(vocab_ab):
    a, b, ab = (vocab_ab.id_of(t) for t in (b"a", b"b", b"ab"))
    assert decompose(vocab_ab, ab) == [(a, b)]


def test_decompose_ordered_by_split_position():
    v = make_vocabulary(["a", "aa", "aaa"])
    a, aa, aaa = (v.id_of(t) for t in (b"a", b"aa", b"aaa"))
    assert decompose(v, aaa) == [(a, aa), (aa, a)]


def test_decompose_skips_unknown_halves():
    v = make_vocabulary(["a", "b", "abb"])
    # "a"+"bb" needs token "bb"; only "ab"+"b" and "a"+"bb" splits exist,
    # neither has both halves in the vocabulary except none here
    assert decompose(v, v.id_of(b"abb")) == []


def test_decompose_bad_id(vocab_ab):
    with pytest.raises(ValidationError):
        decompose(vocab_ab, 17)


def test_off_by_one_examples(vocab_ab, vocab_aa):
    a, b, ab = (vocab_ab.id_of(t) for t in (b"a", b"b", b"ab"))
    assert off_by_one(vocab_ab, (ab,)).members == ((a, b),)
    aa, a2 = vocab_aa.id_of(b"aa"), vocab_aa.id_of(b"a")
    assert off_by_one(vocab_aa, (aa, a2)).members == ((a2, a2, a2),)
    assert off_by_one(vocab_ab, (a,)).members == ()


def test_off_by_one_empty_canonical(vocab_ab):
    with pytest.raises(ValidationError):
        off_by_one(vocab_ab, ())


def test_members_properties():
    rng = random.Random(17)
    for _ in range(25):
        v = make_vocabulary(oracles.random_vocab(rng, "ab", extra_tokens=6))
        text = oracles.random_text(rng, "ab", 10)
        canonical = v.canonical_tokenize(text)
        result = off_by_one(v, canonical)
        lattice = build_lattice(v, text)
        assert len(set(result.members)) == len(result.members)
        assert len(result.members) <= v.max_token_len * len(canonical)
        for m in result.members:
            assert len(m) == len(canonical) + 1
            assert v.detokenize(m) == text
            assert lattice.contains(m)
            assert m != canonical


def test_matches_bruteforce_definition():
    rng = random.Random(23)
    for _ in range(20):
        v = make_vocabulary(oracles.random_vocab(rng, "ab", extra_tokens=5))
        text = oracles.random_text(rng, "ab", 10)
        canonical = v.canonical_tokenize(text)
        got = set(off_by_one(v, canonical).members)
        assert got == oracles.off_by_one_bruteforce(v, text, canonical)


def test_off_by_one_of_noncanonical_base(vocab_aa):
    # any tokenization works as the base sequence, not only the policy's
    a = vocab_aa.id_of(b"a")
    aa = vocab_aa.id_of(b"aa")
    base = (a, aa)  # not what longest-match would produce for "aaa"
    assert off_by_one(vocab_aa, base).members == ((a, a, a),)
