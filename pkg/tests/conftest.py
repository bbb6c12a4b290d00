import os

import pytest

from tests.helpers import FIXTURES, mini_kg, small_model


def pytest_collection_modifyitems(config, items):
    if os.environ.get("RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="slow acceptance run; set RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def kg():
    return mini_kg()


@pytest.fixture
def model(kg):
    return small_model(kg)


@pytest.fixture
def stove_sink_bytes():
    return (FIXTURES / "stove_sink.json").read_bytes()


@pytest.fixture
def mini_kg_path():
    return str(FIXTURES / "mini_kg.json")
