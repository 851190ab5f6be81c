"""Subword vocabularies, canonical tokenization, detokenization.

Text is treated as a raw byte sequence throughout: the alphabet is a set of
byte values, tokens are byte strings, and no pretokenization or Unicode
normalization is performed.  Marker symbols inside tokens (leading "▁"
and the like) are opaque bytes here.

Vocabulary files are JSON.  Token strings map to raw bytes through Latin-1:
byte 0xNN is written as the codepoint U+00NN, which JSON then escapes as
needed.  See `token_str_to_bytes` / `bytes_to_token_str`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .errors import ValidationError

POLICIES = ("longest-match", "bpe-merges", "external")


def token_str_to_bytes(s: str) -> bytes:
    try:
        return s.encode("latin-1")
    except UnicodeEncodeError:
        raise ValidationError(
            f"token string {s!r} contains codepoints above U+00FF and cannot "
            "denote raw bytes"
        ) from None


def bytes_to_token_str(b: bytes) -> str:
    return b.decode("latin-1")


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token table; safe to share across threads after load."""

    tokens: tuple[bytes, ...]
    canonical_policy: str
    merges: tuple[tuple[int, int], ...] = ()
    token_to_id: dict[bytes, int] = field(init=False, repr=False)
    alphabet: frozenset[int] = field(init=False, repr=False)
    max_token_len: int = field(init=False)

    def __post_init__(self):
        if not self.tokens:
            raise ValidationError("vocabulary has no tokens")
        if self.canonical_policy not in POLICIES:
            raise ValidationError(
                f"unknown canonical_policy {self.canonical_policy!r}; "
                f"expected one of {POLICIES}"
            )
        mapping: dict[bytes, int] = {}
        for tid, tok in enumerate(self.tokens):
            if not isinstance(tok, bytes):
                raise ValidationError(f"token {tid} is not a byte string")
            if not tok:
                raise ValidationError(f"token {tid} is empty")
            if tok in mapping:
                raise ValidationError(
                    f"duplicate token {bytes_to_token_str(tok)!r} "
                    f"(ids {mapping[tok]} and {tid})"
                )
            mapping[tok] = tid
        object.__setattr__(self, "token_to_id", mapping)
        object.__setattr__(
            self, "alphabet", frozenset(t[0] for t in self.tokens if len(t) == 1)
        )
        object.__setattr__(self, "max_token_len", max(len(t) for t in self.tokens))
        # every byte used anywhere must itself be a token
        for tok in self.tokens:
            for b in tok:
                if b not in self.alphabet:
                    raise ValidationError(
                        f"alphabet incomplete: byte 0x{b:02x} occurs in token "
                        f"{bytes_to_token_str(tok)!r} but is not a single-byte token"
                    )
        if self.merges and self.canonical_policy != "bpe-merges":
            raise ValidationError("merges are only valid with policy 'bpe-merges'")
        for a, b in self.merges:
            if not (0 <= a < len(self.tokens) and 0 <= b < len(self.tokens)):
                raise ValidationError(f"malformed merges: pair ({a}, {b}) out of range")
            if self.tokens[a] + self.tokens[b] not in mapping:
                raise ValidationError(
                    "malformed merges: merged string "
                    f"{bytes_to_token_str(self.tokens[a] + self.tokens[b])!r} "
                    "is not in the vocabulary"
                )

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: bytes) -> int:
        try:
            return self.token_to_id[token]
        except KeyError:
            raise ValidationError(
                f"unknown token {bytes_to_token_str(token)!r}"
            ) from None

    def check_text(self, text: bytes) -> None:
        for b in text:
            if b not in self.alphabet:
                raise ValidationError(
                    f"unrepresentable byte 0x{b:02x}: not in the vocabulary alphabet"
                )

    def canonical_tokenize(self, text: bytes) -> tuple[int, ...]:
        """Deterministic canonical tokenization of `text` under the policy.

        longest-match: repeated greedy longest prefix.
        bpe-merges:    split to single bytes, then apply merges in rank order.
        external:      error; the caller must supply the canonical sequence.
        """
        if isinstance(text, str):
            raise TypeError("text must be bytes")
        self.check_text(text)
        if self.canonical_policy == "longest-match":
            return self._tokenize_longest_match(text)
        if self.canonical_policy == "bpe-merges":
            return self._tokenize_bpe(text)
        raise ValidationError(
            "vocabulary policy is 'external': the canonical tokenization must "
            "be supplied by the caller"
        )

    def _tokenize_longest_match(self, text: bytes) -> tuple[int, ...]:
        out = []
        pos = 0
        n = len(text)
        while pos < n:
            for length in range(min(self.max_token_len, n - pos), 0, -1):
                tid = self.token_to_id.get(text[pos : pos + length])
                if tid is not None:
                    out.append(tid)
                    pos += length
                    break
            else:  # unreachable: alphabet completeness guarantees a 1-byte hit
                raise ValidationError(f"no token matches at byte {pos}")
        return tuple(out)

    def _tokenize_bpe(self, text: bytes) -> tuple[int, ...]:
        seq = [self.token_to_id[bytes([b])] for b in text]
        for a, b in self.merges:
            merged = self.token_to_id[self.tokens[a] + self.tokens[b]]
            i = 0
            while i < len(seq) - 1:
                if seq[i] == a and seq[i + 1] == b:
                    seq[i : i + 2] = [merged]
                else:
                    i += 1
        return tuple(seq)

    def detokenize(self, ids: Iterable[int]) -> bytes:
        parts = []
        for tid in ids:
            if not isinstance(tid, int) or not (0 <= tid < len(self.tokens)):
                raise ValidationError(f"unknown token-id {tid!r}")
            parts.append(self.tokens[tid])
        return b"".join(parts)

    def pieces(self, ids: Iterable[int]) -> list[str]:
        """Token byte strings as Latin-1 text, for display and JSON output."""
        return [bytes_to_token_str(self.tokens[tid]) for tid in ids]

    def to_json_dict(self) -> dict:
        out: dict = {
            "tokens": [bytes_to_token_str(t) for t in self.tokens],
            "canonical_policy": self.canonical_policy,
            "complete_alphabet": False,
        }
        if self.canonical_policy == "bpe-merges":
            out["merges"] = [
                [bytes_to_token_str(self.tokens[a]), bytes_to_token_str(self.tokens[b])]
                for a, b in self.merges
            ]
        return out


def load_vocabulary(source: str | IO[str] | dict) -> Vocabulary:
    """Load and validate a vocabulary from a JSON file, file object, or dict.

    With `"complete_alphabet": true`, single-byte tokens missing from the
    file are appended automatically (ids after all listed tokens); otherwise
    an incomplete alphabet is an error.
    """
    if isinstance(source, dict):
        raw = source
    elif isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = json.load(source)
    if not isinstance(raw, dict) or "tokens" not in raw:
        raise ValidationError("vocabulary file must be a JSON object with 'tokens'")

    token_strs = raw["tokens"]
    if not isinstance(token_strs, list) or not all(
        isinstance(t, str) for t in token_strs
    ):
        raise ValidationError("'tokens' must be a list of strings")
    tokens = [token_str_to_bytes(t) for t in token_strs]

    policy = raw.get("canonical_policy", "longest-match")
    if raw.get("complete_alphabet", False):
        present = {t[0] for t in tokens if len(t) == 1}
        needed: list[int] = []
        for tok in tokens:
            for b in tok:
                if b not in present and b not in needed:
                    needed.append(b)
        tokens.extend(bytes([b]) for b in needed)

    merges: list[tuple[int, int]] = []
    if "merges" in raw and raw["merges"] is not None:
        mapping = {t: i for i, t in enumerate(tokens)}
        for pair in raw["merges"]:
            if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
                raise ValidationError(f"malformed merges: entry {pair!r}")
            try:
                a = mapping[token_str_to_bytes(pair[0])]
                b = mapping[token_str_to_bytes(pair[1])]
            except KeyError:
                raise ValidationError(
                    f"malformed merges: pair {pair!r} references unknown tokens"
                ) from None
            merges.append((a, b))

    return Vocabulary(
        tokens=tuple(tokens), canonical_policy=policy, merges=tuple(merges)
    )


def make_vocabulary(
    token_strs: Sequence[str],
    canonical_policy: str = "longest-match",
    merges: Sequence[tuple[str, str]] = (),
) -> Vocabulary:
    """Convenience constructor from Latin-1 token strings (tests, fixtures)."""
    return load_vocabulary(
        {
            "tokens": list(token_strs),
            "canonical_policy": canonical_policy,
            "merges": [list(m) for m in merges] or None,
        }
    )
