import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from fluidtcp.loss_models import DropTailSmallBuffer  # noqa: E402
from fluidtcp.protocols import COMPOUND_DEFAULTS, LogLinearTable, ProtocolSpec  # noqa: E402

SCENARIOS = os.path.join(ROOT, "Scenarios")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long simulation or Monte-Carlo checks")


@pytest.fixture
def scenario_path():
    def _path(name: str) -> str:
        return os.path.join(SCENARIOS, name)

    return _path


@pytest.fixture
def compound():
    return COMPOUND_DEFAULTS


@pytest.fixture
def droptail():
    return DropTailSmallBuffer(C=139.0, B=15, tau=0.1)


@pytest.fixture
def hstcp():
    f1 = LogLinearTable.from_pairs([[38, 1], [1000, 10], [83000, 72]])
    f2 = LogLinearTable.from_pairs([[38, 0.5], [1000, 0.33], [83000, 0.1]])
    return ProtocolSpec.hstcp(f1, f2)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(42)
