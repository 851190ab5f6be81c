import json
import random

import pytest

from toklat import ValidationError, build_lattice, load_vocabulary, make_vocabulary
from toklat.vocab import bytes_to_token_str, token_str_to_bytes

import oracles


def test_load_small_vocab(vocab_ab):
    assert len(vocab_ab) == 3
    assert vocab_ab.max_token_len == 2
    assert vocab_ab.alphabet == {ord("a"), ord("b")}


def test_incomplete_alphabet_rejected():
    with pytest.raises(ValidationError, match="alphabet incomplete"):
        make_vocabulary(["ab"])


def test_complete_alphabet_autofill():
    v = load_vocabulary(
        {"tokens": ["ab"], "canonical_policy": "longest-match", "complete_alphabet": True}
    )
    assert [bytes_to_token_str(t) for t in v.tokens] == ["ab", "a", "b"]


def test_max_token_len_from_longest():
    assert make_vocabulary(["a", "aa", "aaa"]).max_token_len == 3


def test_duplicate_token_rejected():
    with pytest.raises(ValidationError, match="duplicate"):
        make_vocabulary(["a", "a"])


def test_empty_token_rejected():
    with pytest.raises(ValidationError, match="empty"):
        make_vocabulary(["a", ""])


def test_malformed_merges_rejected():
    with pytest.raises(ValidationError, match="malformed merges"):
        make_vocabulary(["a", "b"], "bpe-merges", merges=[("a", "b")])  # no 'ab'
    with pytest.raises(ValidationError, match="malformed merges"):
        load_vocabulary(
            {"tokens": ["a", "b", "ab"], "canonical_policy": "bpe-merges",
             "merges": [["a", "c"]]}
        )
    with pytest.raises(ValidationError):
        make_vocabulary(["a", "b", "ab"], "longest-match", merges=[("a", "b")])


def test_longest_match_examples(vocab_aa, vocab_ab):
    aa, a = vocab_aa.id_of(b"aa"), vocab_aa.id_of(b"a")
    assert vocab_aa.canonical_tokenize(b"aaa") == (aa, a)
    assert vocab_ab.canonical_tokenize(b"ab") == (vocab_ab.id_of(b"ab"),)


def test_bpe_merges_tokenize():
    v = make_vocabulary(["a", "b", "ab"], "bpe-merges", merges=[("a", "b")])
    ab = v.id_of(b"ab")
    assert v.canonical_tokenize(b"abab") == (ab, ab)


def test_bpe_merges_match_bruteforce_replay():
    # replay merges over byte strings, no token ids involved
    tokens = ["a", "b", "ab", "ba", "abab"]
    merges = [("a", "b"), ("ab", "ab"), ("b", "a")]
    v = make_vocabulary(tokens, "bpe-merges", merges=merges)
    rng = random.Random(11)
    for _ in range(50):
        text = "".join(rng.choice("ab") for _ in range(rng.randint(1, 12)))
        pieces = list(text)
        for left, right in merges:
            i = 0
            while i < len(pieces) - 1:
                if pieces[i] == left and pieces[i + 1] == right:
                    pieces[i : i + 2] = [left + right]
                else:
                    i += 1
        got = v.canonical_tokenize(text.encode())
        assert [bytes_to_token_str(v.tokens[t]) for t in got] == pieces


def test_external_policy_requires_supplied_canonical():
    v = make_vocabulary(["a", "b"], "external")
    with pytest.raises(ValidationError, match="external"):
        v.canonical_tokenize(b"ab")


def test_detokenize(vocab_ab):
    ab = vocab_ab.id_of(b"ab")
    a, b = vocab_ab.id_of(b"a"), vocab_ab.id_of(b"b")
    assert vocab_ab.detokenize([ab]) == b"ab"
    assert vocab_ab.detokenize([a, b]) == b"ab"
    assert vocab_ab.detokenize([]) == b""
    with pytest.raises(ValidationError, match="unknown token-id"):
        vocab_ab.detokenize([99])


def test_unrepresentable_byte(vocab_ab):
    with pytest.raises(ValidationError, match="unrepresentable"):
        vocab_ab.canonical_tokenize(b"abc")


def test_round_trip_random_vocabs():
    rng = random.Random(1234)
    for _ in range(40):
        v = make_vocabulary(oracles.random_vocab(rng, "abc", extra_tokens=6))
        text = oracles.random_text(rng, "abc", 20)
        assert v.detokenize(v.canonical_tokenize(text)) == text


def test_canonical_is_lattice_path():
    rng = random.Random(99)
    for _ in range(25):
        v = make_vocabulary(oracles.random_vocab(rng, "ab", extra_tokens=5))
        text = oracles.random_text(rng, "ab", 14)
        lattice = build_lattice(v, text)
        assert lattice.contains(v.canonical_tokenize(text))


def test_high_byte_tokens_round_trip(tmp_path):
    # 0xe9 is written as the Latin-1 codepoint U+00E9 in the JSON file
    path = tmp_path / "vocab.json"
    path.write_text(
        json.dumps({"tokens": ["é", "a", "aé"], "canonical_policy": "longest-match"}),
        encoding="utf-8",
    )
    v = load_vocabulary(str(path))
    assert v.tokens[0] == b"\xe9"
    assert v.canonical_tokenize(b"a\xe9") == (2,)
    assert v.detokenize((2,)) == b"a\xe9"


def test_token_str_rejects_wide_codepoints():
    with pytest.raises(ValidationError):
        token_str_to_bytes("Ā")
