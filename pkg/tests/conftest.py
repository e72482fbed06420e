import random

import pytest

from clusterauth.groups import full_group, tiny_group


@pytest.fixture(scope="session")
def tiny():
    return tiny_group()


@pytest.fixture(scope="session")
def full():
    return full_group()


@pytest.fixture
def rng():
    return random.Random(0xA5A5)
