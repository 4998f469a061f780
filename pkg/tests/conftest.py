## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import numpy as np
import pytest

from roddsim.geometry import NetworkParams, NetworkRealization, generate_network
from roddsim.phy import RoddParams
from roddsim.denoiser import build_prior


def make_network(coefficients, snr=1e6, threshold=1e-6) -> NetworkRealization:
    """
    Hand-built realization from a symmetric matrix of channel coefficients;
    every nonzero coefficient is a neighbor link.
    """
    coefficients = np.asarray(coefficients, dtype=complex)
    n = coefficients.shape[0]
    gains = np.abs(coefficients) ** 2
    distances = np.ones((n, n))
    np.fill_diagonal(distances, np.inf)
    return NetworkRealization(
        params=NetworkParams(intensity=0.0, side=1.0, snr=snr, threshold=threshold),
        positions=np.zeros((n, 2)),
        distances=distances,
        gains=gains,
        coefficients=coefficients,
        adjacency=coefficients != 0,
        seed=0,
    )


@pytest.fixture
def published():
    return NetworkParams.published()


@pytest.fixture
def small_params():
    # About eight neighbors per node in a 100 m square.
    return NetworkParams(intensity=30 / 100.0 ** 2, side=100.0, node_count=30)


@pytest.fixture
def small_net(small_params):
    return generate_network(small_params, seed=7)


@pytest.fixture
def rodd5():
    return RoddParams(message_bits=5, frame_length=280, on_probability=0.0824)


@pytest.fixture(scope="session")
def prior5():
    return build_prior(1e-6, 4.0, 5)


@pytest.fixture
def hand_network():
    return make_network
