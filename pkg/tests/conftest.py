"""Shared fixtures."""

import numpy as np
import pytest

from spatial_aoi.channel import NetworkParams
from spatial_aoi.geometry import Realization
from spatial_aoi.util import LOG, LogLevel


@pytest.fixture(autouse=True)
def reset_logger():
    """Restore the global logger after tests that reconfigure it."""
    saved = (LOG.level, LOG.fmt, LOG.file)
    yield
    if LOG.file is not None and LOG.file is not saved[2]:
        LOG.file.close()
    LOG.level, LOG.fmt, LOG.file = saved


@pytest.fixture
def params():
    return NetworkParams()


@pytest.fixture
def small_realization():
    """Three nodes and four interferers at fixed, well-separated positions."""
    nodes = np.array([[1.0, 0.5], [-2.0, 1.5], [0.5, -3.0]])
    interferers = np.array([[6.0, 1.0], [-5.0, -4.0], [2.0, 7.5], [-8.0, 3.0]])
    return Realization(nodes, interferers, 4.0, 20.0)


@pytest.fixture
def quiet():
    """Silence info output for tests that assert on stdout."""
    LOG.level = LogLevel.ERROR
