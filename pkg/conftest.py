from pathlib import Path

import numpy as np
import pytest

from mobw.commands import CommandCollection, default_commands
from mobw.data import CompetingRisksDataset, load_dataset
from mobw.distributions import GDParams
from mobw.samplers import PriorSpec, sample_posterior_restricted, sample_posterior_unrestricted

RETINOPATHY = Path(__file__).parent / "data" / "retinopathy.csv"
POSTERIOR_DRAWS = 100_000


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale Monte Carlo runs (minutes)")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def retinopathy() -> CompetingRisksDataset:
    return load_dataset(RETINOPATHY, time_divisor=365)


@pytest.fixture(scope="session")
def default_prior() -> PriorSpec:
    return PriorSpec.default()


@pytest.fixture
def unit_prior() -> PriorSpec:
    return PriorSpec(GDParams(1.0, 1.0, 1.0, 1.0, 1.0), c1=1.0, c2=1.0)


@pytest.fixture
def small_dataset() -> CompetingRisksDataset:
    """Five observed failures with every cause present."""
    return CompetingRisksDataset.from_observations([(0.3, 0), (0.7, 1), (1.1, 2), (1.4, 1), (2.0, 2)])


@pytest.fixture(scope="session")
def unrestricted_posterior(retinopathy, default_prior):
    return sample_posterior_unrestricted(np.random.default_rng(1), retinopathy, default_prior, POSTERIOR_DRAWS)


@pytest.fixture(scope="session")
def restricted_posterior(retinopathy, default_prior):
    return sample_posterior_restricted(np.random.default_rng(2), retinopathy, default_prior, POSTERIOR_DRAWS)


@pytest.fixture
def commands() -> CommandCollection:
    return default_commands()
