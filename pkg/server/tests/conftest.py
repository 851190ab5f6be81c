import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from toklat_server import ServerConfig, TinyBackend, create_app

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES_PATH = Path(__file__).parent.parent.parent / "fixtures" / "scorer_protocol.json"


@pytest.fixture(scope="session")
def backend():
    return TinyBackend(seed=0)


@pytest.fixture(scope="session")
def client(backend):
    app = create_app(ServerConfig(model="tiny:0"), backend=backend)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c
