"""Model backends: something that maps token-id contexts to next-token
log-probabilities and scores whole sequences with teacher forcing.

Every backend exposes `vocab_size` real tokens; log-probability vectors
have `vocab_size + 1` entries with the end-of-sequence entry last.  The
exported vocabulary file contains exactly the `vocab_size` token byte
strings, written in the toolkit's JSON format (Latin-1 escapes of raw
bytes) with `canonical_policy: "external"`.
"""

from __future__ import annotations

import json
from typing import Protocol, Sequence

import torch
import torch.nn.functional as F
from torch import nn

# digraphs/trigraphs give the built-in model a vocabulary whose lattices
# actually branch; all 256 single bytes keep it total over any input
_TINY_MULTI = [
    "th", "he", "in", "er", "an", "re", "on", "at", "en", "nd", "ti", "es",
    "or", "te", "of", "ed", "is", "it", "al", "ar", "st", "to", "nt", "ng",
    "se", "ha", "as", "ou", "io", "le", "ve", "co", "me", "de", "hi", "ri",
    "ro", "ic", "ne", "ea", "ra", "ce", "li", "ch", "ll", "be", "ma", "si",
    "om", "ur", "e ", "s ", "t ", "d ", ". ",
    "the", "and", "ing", "her", "ere", "ent", "tha", "was", "for", "ion",
    "ter", "ers", "est", "ati", "hat", "ate", "all", "his", "ver",
]


class Backend(Protocol):
    vocab_size: int
    mapping_family: str

    def token_bytes(self) -> list[bytes]: ...

    def next_logprobs(self, context: Sequence[int]) -> list[float]: ...

    def score(
        self, context: Sequence[int], sequences: Sequence[Sequence[int]],
        include_eos: bool,
    ) -> list[float]: ...


class _TinyTransformer(nn.Module):
    def __init__(self, vocab_with_specials: int, max_positions: int = 512):
        super().__init__()
        d_model = 64
        self.embed = nn.Embedding(vocab_with_specials, d_model)
        self.pos = nn.Embedding(max_positions, d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=d_model, nhead=4, dim_feedforward=128,
            batch_first=True, dropout=0.0,
        )
        self.blocks = nn.TransformerEncoder(layer, num_layers=2)
        self.norm = nn.LayerNorm(d_model)
        self.head = nn.Linear(d_model, vocab_with_specials - 1)  # no bos output
        self.max_positions = max_positions

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        t = ids.shape[1]
        mask = nn.Transformer.generate_square_subsequent_mask(t)
        x = self.embed(ids) + self.pos(torch.arange(t, device=ids.device))[None]
        x = self.blocks(x, mask=mask)
        return self.head(self.norm(x))


class TinyBackend:
    """Small open-architecture causal transformer with seeded random
    weights: deterministic, self-contained, needs no downloaded weights.

    Token ids: 0..vocab_size-1 are byte strings (all 256 single bytes plus
    common English digraphs/trigraphs); internally vocab_size is the eos
    embedding and vocab_size+1 the beginning-of-sequence marker.  Output
    logits cover vocab_size+1 entries (tokens then eos).
    """

    mapping_family = "byte-literal"

    def __init__(self, seed: int = 0, device: str = "cpu"):
        self.seed = seed
        self._tokens = [bytes([b]) for b in range(256)] + [
            t.encode("latin-1") for t in _TINY_MULTI
        ]
        self.vocab_size = len(self._tokens)
        self._eos = self.vocab_size
        self._bos = self.vocab_size + 1
        torch.manual_seed(seed)
        self._model = _TinyTransformer(self.vocab_size + 2).to(device)
        self._model.eval()
        self._device = device

    def token_bytes(self) -> list[bytes]:
        return list(self._tokens)

    def _forward(self, rows: list[list[int]]) -> torch.Tensor:
        width = max(len(r) for r in rows)
        if width > self._model.max_positions:
            raise ValueError(
                f"sequence of {width} tokens exceeds the model's "
                f"{self._model.max_positions}-position window"
            )
        ids = torch.full((len(rows), width), self._eos, dtype=torch.long)
        for i, r in enumerate(rows):
            ids[i, : len(r)] = torch.tensor(r, dtype=torch.long)
        with torch.no_grad():
            return self._model(ids.to(self._device))

    def next_logprobs(self, context: Sequence[int]) -> list[float]:
        row = [self._bos] + list(context)
        logits = self._forward([row])[0, len(row) - 1]
        return F.log_softmax(logits.double(), dim=-1).tolist()

    def score(
        self, context: Sequence[int], sequences: Sequence[Sequence[int]],
        include_eos: bool,
    ) -> list[float]:
        if not sequences:
            return []
        context = list(context)
        rows = [[self._bos] + context + list(seq) for seq in sequences]
        logits = self._forward(rows)
        out = []
        for i, seq in enumerate(sequences):
            logprobs = F.log_softmax(logits[i].double(), dim=-1)
            total = 0.0
            base = len(context)  # logit position predicting seq[0]
            for j, tid in enumerate(seq):
                total += float(logprobs[base + j, tid])
            if include_eos:
                total += float(logprobs[base + len(seq), self._eos])
            out.append(total)
        return out


def gpt2_byte_decoder() -> dict[str, int]:
    """Inverse of the byte-level BPE printable-unicode byte table."""
    visible = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(0xA1, 0xAC + 1))
        + list(range(0xAE, 0xFF + 1))
    )
    chars = {b: chr(b) for b in visible}
    offset = 0
    for b in range(256):
        if b not in chars:
            chars[b] = chr(256 + offset)
            offset += 1
    return {c: b for b, c in chars.items()}


def piece_to_bytes(piece: str, family: str) -> bytes:
    """Raw bytes of one tokenizer piece under a known mapping family."""
    if family == "byte-bpe":
        decoder = gpt2_byte_decoder()
        return bytes(decoder[c] for c in piece)
    if family == "sentencepiece":
        return piece.replace("▁", " ").encode("utf-8")
    if family == "byte-literal":
        return piece.encode("latin-1")
    raise ValueError(f"unknown mapping family {family!r}")


class HFBackend:
    """Wraps a HuggingFace causal LM (requires the `hf` extra and local or
    downloadable weights).  Exposes the tokenizer's own id space; the eos
    output entry re-uses the model's eos logit."""

    def __init__(self, model_id: str, device: str = "cpu", family: str | None = None):
        from transformers import AutoModelForCausalLM, AutoTokenizer  # lazy

        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id).to(device)
        self.model.eval()
        self.vocab_size = len(self.tokenizer)
        self._device = device
        self._eos = self.tokenizer.eos_token_id
        self._bos = self.tokenizer.bos_token_id or self._eos
        if family is None:
            family = "byte-bpe" if hasattr(self.tokenizer, "byte_encoder") or (
                "gpt2" in type(self.tokenizer).__name__.lower()
            ) else "sentencepiece"
        self.mapping_family = family

    def token_bytes(self) -> list[bytes]:
        pieces = self.tokenizer.convert_ids_to_tokens(list(range(self.vocab_size)))
        return [piece_to_bytes(p, self.mapping_family) for p in pieces]

    def _logprobs(self, rows: list[list[int]]) -> "torch.Tensor":
        import torch as _torch

        width = max(len(r) for r in rows)
        ids = _torch.full((len(rows), width), self._eos, dtype=_torch.long)
        attn = _torch.zeros((len(rows), width), dtype=_torch.long)
        for i, r in enumerate(rows):
            ids[i, : len(r)] = _torch.tensor(r, dtype=_torch.long)
            attn[i, : len(r)] = 1
        with _torch.no_grad():
            logits = self.model(
                ids.to(self._device), attention_mask=attn.to(self._device)
            ).logits
        return F.log_softmax(logits.double(), dim=-1)

    def next_logprobs(self, context: Sequence[int]) -> list[float]:
        row = [self._bos] + list(context)
        lp = self._logprobs([row])[0, len(row) - 1]
        vec = lp[: self.vocab_size].tolist()
        vec.append(float(lp[self._eos]))
        # eos appears twice in the model's own space; fold and renormalize
        return _renormalize(vec, drop_index=self._eos)

    def score(self, context, sequences, include_eos):
        if not sequences:
            return []
        context = list(context)
        rows = [[self._bos] + context + list(seq) for seq in sequences]
        lp = self._logprobs(rows)
        out = []
        for i, seq in enumerate(sequences):
            base = len(context)
            total = 0.0
            for j, tid in enumerate(seq):
                total += float(lp[i, base + j, tid])
            if include_eos:
                total += float(lp[i, base + len(seq), self._eos])
            out.append(total)
        return out


def _renormalize(vec: list[float], drop_index: int) -> list[float]:
    import math

    kept = [v for i, v in enumerate(vec[:-1]) if i != drop_index] + [vec[-1]]
    hi = max(kept)
    total = hi + math.log(sum(math.exp(v - hi) for v in kept))
    out = []
    for i, v in enumerate(vec[:-1]):
        out.append(float("-inf") if i == drop_index else v - total)
    out.append(vec[-1] - total)
    return out


def build_backend(model: str, device: str = "cpu") -> Backend:
    if model.startswith("tiny:"):
        return TinyBackend(seed=int(model.split(":", 1)[1]), device=device)
    return HFBackend(model, device=device)


def export_vocab(backend: Backend, path: str) -> dict:
    """Write the backend's vocabulary in the toolkit's JSON format.

    Tokens whose bytes are not all covered by single-byte tokens are
    reported in `warnings` (such a file needs the toolkit's
    alphabet-completion disabled semantics resolved by hand) but the export
    itself never fails.
    """
    tokens = backend.token_bytes()
    singles = {t[0] for t in tokens if len(t) == 1}
    complete = all(b in singles for tok in tokens for b in tok)
    warnings = []
    if not complete:
        bad = sorted({b for tok in tokens for b in tok if b not in singles})
        warnings.append(
            "bytes without single-byte tokens: "
            + ", ".join(f"0x{b:02x}" for b in bad[:20])
            + ("..." if len(bad) > 20 else "")
        )
    seen: dict[bytes, int] = {}
    for i, tok in enumerate(tokens):
        if tok in seen:
            warnings.append(f"duplicate surface form at ids {seen[tok]} and {i}")
        else:
            seen[tok] = i
    payload = {
        "tokens": [t.decode("latin-1") for t in tokens],
        "canonical_policy": "external",
        "complete_alphabet": complete,
        "vocab_size": backend.vocab_size,
        "mapping_family": backend.mapping_family,
    }
    if warnings:
        payload["warnings"] = warnings
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    return payload
