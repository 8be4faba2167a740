import pytest

from ionkin.model import build_channel_table

FS = 1e-15


@pytest.fixture(scope="session")
def table():
    return build_channel_table(93.0)
