import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from grql.store_io import load_seed


@pytest.fixture(scope="session")
def seed_snapshot():
    return load_seed()


@pytest.fixture()
def seed_schema(seed_snapshot):
    return seed_snapshot.schema


@pytest.fixture()
def seed_store(seed_snapshot):
    return seed_snapshot.store
