import numpy as np
import pytest

import orchardloc as ol


@pytest.fixture(scope="session")
def default_map():
    return ol.generate_map(seed=0)


@pytest.fixture(scope="session")
def small_map():
    # 12 rows keeps campaign generation possible while staying quick.
    return ol.generate_map(seed=3, rows=12, trees_per_row=12)


@pytest.fixture(scope="session")
def default_cfg():
    return ol.SensorConfig()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
