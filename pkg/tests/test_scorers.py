import math
import random

import numpy as np
import pytest

from toklat import (
    HashLM,
    NGramLM,
    RandomStream,
    UniformScorer,
    ValidationError,
    make_vocabulary,
    build_lattice,
    rejection_sample,
    score_sequence,
)

import oracles


def random_context(rng, vocab_size, max_len=8):
    return tuple(rng.randrange(vocab_size) for _ in range(rng.randint(0, max_len)))


@pytest.mark.parametrize(
    "factory",
    [
        lambda: UniformScorer(5),
        lambda: HashLM(7, 5),
        lambda: HashLM(99, 12, temperature=0.3),
        lambda: NGramLM.train([[0, 1, 2], [1, 1, 0]], vocab_size=5, order=2),
        lambda: NGramLM.train([[0, 1, 2, 3]], vocab_size=5, order=3, add_k=0.1),
    ],
)
def test_distributions_normalized(factory):
    scorer = factory()
    rng = random.Random(1)
    for _ in range(200):
        ctx = random_context(rng, scorer.vocab_size)
        total = np.exp(scorer.next_logprobs(ctx)).sum()
        assert abs(total - 1.0) <= 1e-9


def test_uniform_score_example():
    scorer = UniformScorer(3)
    assert score_sequence(scorer, (), (0, 1, 2)) == pytest.approx(
        3 * math.log(1 / 4), abs=1e-12
    )
    assert score_sequence(scorer, (), ()) == 0.0


def test_hash_lm_score_matches_stepwise():
    scorer = HashLM(seed=7, vocab_size=3)
    expected = float(scorer.next_logprobs(())[0]) + float(
        scorer.next_logprobs((0,))[1]
    )
    assert score_sequence(scorer, (), (0, 1)) == pytest.approx(expected, abs=1e-12)


def test_hash_lm_deterministic():
    one = HashLM(5, 8).next_logprobs((1, 2, 3))
    two = HashLM(5, 8).next_logprobs((1, 2, 3))
    assert one.tobytes() == two.tobytes()
    assert HashLM(6, 8).next_logprobs((1, 2, 3)).tobytes() != one.tobytes()


def test_hash_lm_temperature_sharpens():
    mild = HashLM(3, 20, temperature=1.0).next_logprobs(())
    sharp = HashLM(3, 20, temperature=0.05).next_logprobs(())
    assert np.exp(sharp).max() > np.exp(mild).max()


def test_include_eos_adds_final_factor():
    scorer = HashLM(11, 4)
    base = score_sequence(scorer, (), (0, 2))
    with_eos = score_sequence(scorer, (), (0, 2), include_eos=True)
    tail = float(scorer.next_logprobs((0, 2))[scorer.eos_id])
    assert with_eos == pytest.approx(base + tail, abs=1e-12)


def test_ngram_hand_computed_probabilities():
    model = NGramLM.train([[0, 1]], vocab_size=2, order=2, add_k=0.5)
    # context (): count {0: 1}, total 1, width 3 -> p = (c + .5) / (1 + 1.5)
    lp = model.next_logprobs(())
    assert np.exp(lp[0]) == pytest.approx(1.5 / 2.5, abs=1e-12)
    assert np.exp(lp[1]) == pytest.approx(0.5 / 2.5, abs=1e-12)
    # context (1,): eos observed once; bigram key is the last token only
    lp1 = model.next_logprobs((0, 1))
    assert np.exp(lp1[model.eos_id]) == pytest.approx(1.5 / 2.5, abs=1e-12)
    # unseen context key falls back to the uniform add-k prior
    wide = NGramLM.train([[0, 1]], vocab_size=4, order=2, add_k=0.5)
    lp2 = wide.next_logprobs((3,))
    assert np.exp(lp2).tolist() == pytest.approx([1 / 5] * 5, abs=1e-12)


def test_ngram_serialization_round_trip(tmp_path):
    model = NGramLM.train([[0, 1, 2], [2, 1]], vocab_size=4, order=3, add_k=0.25)
    path = tmp_path / "ngram.json"
    model.save(str(path))
    loaded = NGramLM.load(str(path))
    rng = random.Random(2)
    for _ in range(30):
        ctx = random_context(rng, 4)
        assert loaded.next_logprobs(ctx).tobytes() == model.next_logprobs(ctx).tobytes()


def test_ngram_validation():
    with pytest.raises(ValidationError):
        NGramLM(4, order=4)
    with pytest.raises(ValidationError):
        NGramLM(4, add_k=0.0)


def test_instrumentation_counters():
    scorer = HashLM(1, 4)
    scorer.next_logprobs(())
    scorer.next_logprobs((0,))
    assert scorer.stats.sequential_next_calls == 2
    scorer.next_logprobs_batch([(), (1,), (2,)])
    assert scorer.stats.batched_next_contexts == 3
    scorer.score_batch((), [(0, 1), (2,)])
    assert scorer.stats.sequences_scored == 2
    assert scorer.stats.score_requests == 1
    assert scorer.stats.sequential_next_calls == 2  # scoring added none
    delta = scorer.stats.since(scorer.stats.copy())
    assert delta.total_model_calls() == 0


def test_rejection_sample_properties(vocab_ab):
    scorer = HashLM(3, len(vocab_ab))
    rng = RandomStream(5)
    lattice = build_lattice(vocab_ab, b"ab")
    accepted_any = False
    for _ in range(300):
        draw = rejection_sample(scorer, (), vocab_ab, b"ab", max_len=6, rng=rng)
        if draw.accepted:
            accepted_any = True
            assert draw.eos_terminated
            assert lattice.contains(draw.ids)
            assert vocab_ab.detokenize(draw.ids) == b"ab"
    assert accepted_any  # hash scorer is near-uniform; 300 draws suffice


def test_rejection_never_accepts_unreachable_text():
    v = make_vocabulary(["a", "b"])
    scorer = UniformScorer(1)  # can only emit token 0 = "a"
    rng = RandomStream(1)
    for _ in range(100):
        draw = rejection_sample(scorer, (), v, b"b", max_len=4, rng=rng)
        assert not draw.accepted


def test_rejection_acceptance_tracks_probability():
    # bigram trained on one sequence: that sequence is sampled often
    v = make_vocabulary(["a", "b", "ab"])
    target = v.canonical_tokenize(b"ab")
    model = NGramLM.train([target] * 50, vocab_size=len(v), order=2, add_k=0.01)
    rng = RandomStream(9)
    hits = sum(
        rejection_sample(model, (), v, b"ab", max_len=4, rng=rng).accepted
        for _ in range(500)
    )
    true_p = oracles.marginal(model, (), v, b"ab", include_eos=True)
    sigma = math.sqrt(true_p * (1 - true_p) / 500)
    assert abs(hits / 500 - true_p) < 3 * sigma
