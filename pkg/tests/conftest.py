import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cssrad.radial import RadialGrid

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

@pytest.fixture
def grid():
    return RadialGrid(512, 16.0)


@pytest.fixture
def gaussian_field(grid):
    return grid.sample(lambda r: np.exp(-(r**2) / 2) + 0j)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
