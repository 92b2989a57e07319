# tests/conftest.py
"""Shared fixtures"""

import numpy as np
import pytest

from dcda.core.objectives import gen_linreg, gen_robust, gen_svm
from dcda.core.schedule import make_static
from dcda.core.topology import make_full, make_ring, mixing_from_adjacency
from dcda.models.domain import GradientMode, PerfectChannel, RunConfig, StepSchedule


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def linreg_small():
    return gen_linreg(n=4, m=8, d=6, noise_sigma=0.1, seed=3)


@pytest.fixture
def robust_small():
    return gen_robust(n=4, m=6, d=5, seed=5)


@pytest.fixture
def svm_small():
    return gen_svm(n=4, m=8, d=6, seed=7)


@pytest.fixture
def ring4():
    return make_ring(4, 1)


@pytest.fixture
def full4_mixing():
    return mixing_from_adjacency(make_full(4))


def static_config(problem, graph=None, C=0.05, T=50, channel=None, gradient=None, method="max_degree"):
    """Perfect-channel static-sharing RunConfig over ``graph`` (full by default)"""
    graph = graph if graph is not None else make_full(problem.n)
    P = mixing_from_adjacency(graph, method=method)
    return RunConfig(
        problem=problem,
        graph=graph,
        policy=make_static(P, problem.d),
        channel=channel or PerfectChannel(),
        gradient=gradient or GradientMode(),
        T=T,
        schedule=StepSchedule(C=C),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
