import json

import numpy as np
import pytest
import requests

from toklat import (
    HTTPScorer,
    HashLM,
    ScorerConnectionError,
    ScorerProtocolError,
    UniformScorer,
    score_sequence,
)

from conftest import FIXTURES_DIR
from mock_server import scorer_server


def test_matches_local_scorer_exactly():
    local = UniformScorer(4)
    with scorer_server(UniformScorer(4)) as url:
        remote = HTTPScorer(url)
        assert remote.vocab_size == 4
        seq = (0, 3, 1)
        assert score_sequence(remote, (2,), seq) == pytest.approx(
            score_sequence(local, (2,), seq), abs=1e-12
        )
        np.testing.assert_allclose(
            remote.next_logprobs((1,)), local.next_logprobs((1,)), atol=1e-12
        )


def test_unnormalized_response_rejected():
    with scorer_server(HashLM(3, 4), mode="unnormalized") as url:
        remote = HTTPScorer(url, vocab_size=4)
        with pytest.raises(ScorerProtocolError, match="not normalized"):
            remote.next_logprobs(())


def test_wrong_vector_length_rejected():
    with scorer_server(HashLM(3, 4), mode="short") as url:
        remote = HTTPScorer(url, vocab_size=4)
        with pytest.raises(ScorerProtocolError, match="expected 5 logprobs"):
            remote.next_logprobs(())


def test_batching_one_post_per_chunk_order_preserved():
    backend = HashLM(5, 6)
    local = HashLM(5, 6)
    sequences = [(i % 6, (i * 7) % 6) for i in range(130)]
    with scorer_server(backend) as url:
        remote = HTTPScorer(url, vocab_size=6, batch_size=64)
        got = remote.score_batch((0,), sequences)
        assert remote.stats.score_requests == 3  # ceil(130 / 64)
    expected = local.score_batch((0,), sequences)
    assert got == pytest.approx(expected, abs=1e-9)


def test_retries_then_succeeds():
    with scorer_server(UniformScorer(3), mode="flaky", failures=2) as url:
        remote = HTTPScorer(url, vocab_size=3, backoff=0.01)
        vec = remote.next_logprobs(())
        assert len(vec) == 4


def test_persistent_failure_raises_connection_error():
    with scorer_server(UniformScorer(3), mode="flaky", failures=99) as url:
        remote = HTTPScorer(url, vocab_size=3, backoff=0.01)
        with pytest.raises(ScorerConnectionError):
            remote.next_logprobs(())


def test_unreachable_endpoint():
    with pytest.raises(ScorerConnectionError):
        HTTPScorer("http://127.0.0.1:9", vocab_size=3, backoff=0.01).next_logprobs(())


def test_client_surfaces_server_error_message():
    with scorer_server(UniformScorer(3)) as url:
        remote = HTTPScorer(url, vocab_size=3)
        with pytest.raises(ScorerProtocolError, match="valid token ids"):
            remote.next_logprobs((99,))


def test_batched_contexts_order_preserved():
    backend = HashLM(9, 5)
    local = HashLM(9, 5)
    contexts = [(i % 5,) * (i % 3) for i in range(20)]
    with scorer_server(backend) as url:
        remote = HTTPScorer(url, vocab_size=5, max_in_flight=4)
        got = remote.next_logprobs_batch(contexts)
    for g, ctx in zip(got, contexts):
        np.testing.assert_allclose(g, local.next_logprobs(ctx), atol=1e-12)


def run_protocol_fixtures(post, vocab_size):
    """Shared golden-fixture interpreter; the reference server runs the same
    file through its own copy of this logic."""
    cases = json.loads((FIXTURES_DIR / "scorer_protocol.json").read_text())["cases"]
    assert cases, "fixture file is empty"
    for case in cases:
        expect = case["expect"]
        status, payload = post(case)
        assert status == expect["status"], case["name"]
        if expect.get("error"):
            assert isinstance(payload.get("error"), str) and payload["error"], case["name"]
            continue
        values = payload["logprobs"]
        want_len = expect.get("logprobs_len")
        if want_len == "vocab_size_plus_1":
            assert len(values) == vocab_size + 1, case["name"]
        elif want_len == "num_sequences":
            assert len(values) == len(case["body"]["sequences"]), case["name"]
        if "normalized_tol" in expect:
            total = np.logaddexp.reduce(np.array(values, dtype=float))
            assert abs(total) <= expect["normalized_tol"], case["name"]
        if expect.get("all_finite"):
            assert all(np.isfinite(values)), case["name"]
        if expect.get("all_nonpositive"):
            assert all(v <= 0 for v in values), case["name"]
        if "values" in expect:
            assert values == pytest.approx(
                expect["values"], abs=expect.get("values_tol", 1e-9)
            ), case["name"]
        if "deterministic_tol" in expect:
            _, payload2 = post(case)
            assert np.allclose(
                values, payload2["logprobs"], atol=expect["deterministic_tol"]
            ), case["name"]


def test_mock_server_passes_shared_protocol_fixtures():
    backend = HashLM(13, 7)
    with scorer_server(backend) as url:
        session = requests.Session()

        def post(case):
            target = url + case["endpoint"]
            if "raw_body" in case:
                resp = session.post(target, data=case["raw_body"], timeout=10)
            else:
                resp = session.post(target, json=case["body"], timeout=10)
            return resp.status_code, resp.json()

        run_protocol_fixtures(post, vocab_size=7)
