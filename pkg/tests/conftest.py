import numpy as np
import pytest

from field_sne.synthetic import gaussian_clusters


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def blob_data():
    """Small labeled cluster dataset shared across tests."""
    data, labels = gaussian_clusters(240, 12, n_clusters=4, seed=7)
    return data, labels
