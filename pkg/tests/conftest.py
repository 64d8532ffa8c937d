import numpy as np
import pytest
from importlib.resources import files

from ucproxy.grid import load_case
from ucproxy.sampler import load_sampler_config


@pytest.fixture(scope="session")
def desk_case():
    return load_case(str(files("ucproxy").joinpath("data/desk6_case.json")))


@pytest.fixture(scope="session")
def desk_sampler_config(desk_case):
    return load_sampler_config(
        str(files("ucproxy").joinpath("data/desk6_sampler.json")), desk_case)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
