import numpy as np
import pytest

from dimreader import TSNE, datasets


@pytest.fixture(scope="session")
def iris():
    return datasets.iris()


@pytest.fixture(scope="session")
def iris_tsne(iris):
    """Fitted t-SNE on iris; converging takes several seconds, so fit once."""
    return TSNE().fit(iris.data)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
