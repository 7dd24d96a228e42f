import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from contractive_inn import ImplicitNetwork, PositiveWeights, random_network

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACTIVATION_KINDS = ("relu", "leaky_relu", "tanh", "sigmoid", "identity")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_relu():
    """z = relu(0.5 z + x), fixed point 2 at x = 1."""
    return ImplicitNetwork.from_arrays([[0.5]], [[1.0]], activation="relu")


@pytest.fixture
def identity_pair():
    """W = 0, U = 1, C = (1, -1): f(x) = (x, -x)."""
    return ImplicitNetwork.from_arrays([[0.0]], [[1.0]], C=[[1.0], [-1.0]], activation="identity")


@pytest.fixture
def small_net():
    net, eta = random_network(4, 3, 3, gamma=0.3, activation="tanh", seed=7, eta_spread=0.4)
    return net, eta


def ones(n):
    return PositiveWeights.ones(n)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        passed, detail = RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'}: {detail}")
