from __future__ import annotations

from dataclasses import dataclass


@dataclass
class ServerConfig:
    """Runtime configuration for the scoring service.

    `model` is either `tiny:SEED` (the built-in randomly initialized
    transformer, deterministic per seed) or a HuggingFace model id / local
    path (requires the `hf` extra).
    """

    model: str = "tiny:0"
    device: str = "cpu"
    max_batch_size: int = 64
    max_concurrent_requests: int = 16
    host: str = "127.0.0.1"
    port: int = 8731
    vocab_export_path: str | None = None
