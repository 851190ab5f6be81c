import sys
from pathlib import Path

import pytest

from toklat import make_vocabulary

sys.path.insert(0, str(Path(__file__).parent))  # oracles, mock_server

FIXTURES_DIR = Path(__file__).parent.parent / "fixtures"


@pytest.fixture
def vocab_ab():
    """{a, b, ab}: the smallest interesting vocabulary."""
    return make_vocabulary(["a", "b", "ab"])


@pytest.fixture
def vocab_aa():
    """{a, aa}: Fibonacci-many segmentations of a^n."""
    return make_vocabulary(["a", "aa"])
