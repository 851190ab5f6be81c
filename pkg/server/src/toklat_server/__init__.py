from .app import create_app, serve
from .backends import (
    HFBackend,
    TinyBackend,
    build_backend,
    export_vocab,
    gpt2_byte_decoder,
    piece_to_bytes,
)
from .config import ServerConfig

__all__ = [
    "HFBackend",
    "ServerConfig",
    "TinyBackend",
    "build_backend",
    "create_app",
    "export_vocab",
    "gpt2_byte_decoder",
    "piece_to_bytes",
    "serve",
]
