import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lsvlab.lsv import make_grid
from lsvlab.noise import ParamDistribution

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid():
    return make_grid()


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(1024)


@pytest.fixture(params=["discrete", "uniform", "quadratic"])
def dist(request):
    return ParamDistribution(request.param, 0.3, 0.6, 0.5)
