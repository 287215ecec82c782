from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def tiny_movielens() -> Path:
    """Committed 3-movie/10-user dataset with hand-computed expectations."""
    return DATA_DIR / "movielens_tiny"
