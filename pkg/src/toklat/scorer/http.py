"""Scorer backed by a remote scoring service.

Wire protocol (JSON over HTTP):

  POST {endpoint}/v1/next_logprobs   {"context": [ids]}
      -> {"logprobs": [float; vocab_size + 1]}          (last entry = eos)
  POST {endpoint}/v1/score           {"context": [ids],
                                      "sequences": [[ids], ...],
                                      "include_eos": bool}
      -> {"logprobs": [float; one total per sequence]}
  errors -> HTTP 4xx with {"error": "..."}

Requests are retried (exponential backoff, 3 attempts) on connection
failures and 5xx; concurrent requests are bounded; batch results are
reassembled in order.  Distribution responses must be normalized within
`normalization_tol` (they are then renormalized exactly, so float32
services still satisfy the scorer-side invariant).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np
import requests

from ..errors import ScorerConnectionError, ScorerProtocolError
from ..logmath import logsumexp
from .base import Context, Scorer


class HTTPScorer(Scorer):
    name = "http"

    def __init__(
        self,
        endpoint: str,
        vocab_size: int | None = None,
        batch_size: int = 64,
        max_in_flight: int = 4,
        timeout: float = 60.0,
        retries: int = 3,
        backoff: float = 0.25,
        normalization_tol: float = 1e-6,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.normalization_tol = normalization_tol
        self._session = session or requests.Session()
        if vocab_size is None:
            probe = self._post("/v1/next_logprobs", {"context": []})
            vocab_size = len(self._logprob_list(probe)) - 1
        super().__init__(vocab_size)

    def _post(self, path: str, body: dict) -> dict:
        url = self.endpoint + path
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if 500 <= resp.status_code < 600:
                last_exc = ScorerConnectionError(
                    f"{url} answered {resp.status_code}: {resp.text[:200]}"
                )
                continue
            if resp.status_code != 200:
                try:
                    message = resp.json().get("error", resp.text[:200])
                except ValueError:
                    message = resp.text[:200]
                raise ScorerProtocolError(
                    f"{url} answered {resp.status_code}: {message}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise ScorerProtocolError(f"{url} returned non-JSON body") from exc
        raise ScorerConnectionError(
            f"{url} unreachable after {self.retries} attempts: {last_exc}"
        )

    @staticmethod
    def _logprob_list(payload: dict) -> list[float]:
        got = payload.get("logprobs")
        if not isinstance(got, list) or not all(
            isinstance(x, (int, float)) for x in got
        ):
            raise ScorerProtocolError("response is missing a numeric 'logprobs' list")
        return [float(x) for x in got]

    def _fetch_distribution(self, context: Context) -> np.ndarray:
        values = self._logprob_list(
            self._post("/v1/next_logprobs", {"context": list(context)})
        )
        if len(values) != self.vocab_size + 1:
            raise ScorerProtocolError(
                f"expected {self.vocab_size + 1} logprobs, got {len(values)}"
            )
        total = logsumexp(values)
        if abs(total) > self.normalization_tol:
            raise ScorerProtocolError(
                f"next_logprobs response is not normalized: sum(exp) deviates "
                f"by exp({total:.3e})"
            )
        return np.array(values) - total

    def _next_logprobs(self, context: Context) -> np.ndarray:
        return self._fetch_distribution(context)

    def _next_logprobs_batch(self, contexts: Sequence[Context]) -> list[np.ndarray]:
        if len(contexts) <= 1:
            return [self._fetch_distribution(c) for c in contexts]
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(self._fetch_distribution, contexts))

    def _score_chunk(
        self, context: Context, chunk: Sequence[Context], include_eos: bool
    ) -> list[float]:
        self._count_score_request()
        payload = self._post(
            "/v1/score",
            {
                "context": list(context),
                "sequences": [list(s) for s in chunk],
                "include_eos": include_eos,
            },
        )
        values = self._logprob_list(payload)
        if len(values) != len(chunk):
            raise ScorerProtocolError(
                f"scored {len(chunk)} sequences but got {len(values)} results"
            )
        return values

    def _score_batch(
        self, context: Context, sequences: Sequence[Context], include_eos: bool
    ) -> list[float]:
        chunks = [
            sequences[i : i + self.batch_size]
            for i in range(0, len(sequences), self.batch_size)
        ]
        if not chunks:
            return []
        if len(chunks) == 1:
            return self._score_chunk(context, chunks[0], include_eos)
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            parts = pool.map(
                lambda c: self._score_chunk(context, c, include_eos), chunks
            )
            return [v for part in parts for v in part]


def http_scorer(endpoint: str, **kwargs) -> HTTPScorer:
    return HTTPScorer(endpoint, **kwargs)
