import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import toy_mean_pool  # noqa: E402


@pytest.fixture
def toy():
    """(mean-pool encoder, query bundle with mean (2,0), 3-token vocabulary)."""
    return toy_mean_pool()
