import time

import pytest

from hybridpark.controllers import ControllerSet
from hybridpark.experiments import GOLDEN, golden, run_scenario


@pytest.fixture(scope="session")
def controllers():
    return ControllerSet.load()


@pytest.fixture(scope="session")
def golden_runs(controllers):
    """Each golden scenario run once: name -> (report, wall-clock seconds)."""
    out = {}
    for name in GOLDEN:
        cfg = golden(name)
        t0 = time.perf_counter()
        report = run_scenario(cfg, controllers=controllers)
        out[name] = (report, time.perf_counter() - t0)
    return out
