import pytest

from mpcmarket.analytics.datagen import load_bundled_dataset, load_bundled_model
from mpcmarket.he import bfv


@pytest.fixture(scope="session")
def bundled_model():
    return load_bundled_model()


@pytest.fixture(scope="session")
def bundled_dataset(bundled_model):
    rows, labels = load_bundled_dataset(bundled_model)
    return rows, labels


@pytest.fixture(scope="session")
def params4096():
    return bfv.HeParams.default(4096, t_bits=16)


@pytest.fixture(scope="session")
def keys4096(params4096):
    return bfv.keygen(params4096, seed=1234)


@pytest.fixture(scope="session")
def params8192():
    return bfv.HeParams.default(8192, t_bits=21)


@pytest.fixture(scope="session")
def keys8192(params8192):
    return bfv.keygen(params8192, seed=1234)
