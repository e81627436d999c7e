import warnings

import pytest
from hypothesis import settings

from twinctl.devices import open_sim
from twinctl.errors import ExtrapolationWarning

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")


@pytest.fixture
def sim():
    return open_sim(seed=0)


@pytest.fixture(autouse=True)
def _strict_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error", ExtrapolationWarning)
        yield
