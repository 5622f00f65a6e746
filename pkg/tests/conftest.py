import numpy as np
import pytest

from heraldopt import learning
from heraldopt.config import ExperimentConfig
from heraldopt.detector import load_readout_matrix


def random_unitary(n, rng):
    """Haar-like unitary from the QR decomposition of a Ginibre matrix."""
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


@pytest.fixture(scope="session")
def default_config():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def default_setup(default_config):
    return default_config.make_setup()


@pytest.fixture(scope="session")
def default_target(default_config):
    return default_config.make_target()


@pytest.fixture(scope="session")
def resta_detector():
    return load_readout_matrix("resta-2023")


@pytest.fixture(scope="session")
def bootstrap_angles(default_setup, default_target, default_config):
    """The ideal-detector solution all downstream training tests start from."""
    return learning.bootstrap_ideal(
        default_setup,
        default_target,
        hyper_overrides=default_config.bootstrap_overrides(),
        restarts=default_config.bootstrap_restarts,
    )
