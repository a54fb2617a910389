import numpy as np
import pytest

from d2doff.config import Config
from d2doff.analytic import AnalyticParams


@pytest.fixture(scope="session")
def default_config() -> Config:
    return Config()


@pytest.fixture(scope="session")
def default_params(default_config) -> AnalyticParams:
    return AnalyticParams.from_config(default_config)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)
