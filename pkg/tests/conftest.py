import numpy as np
import pytest

from icos.experiments import McDesign
from icos.models import BsModel
from icos.market_data import OptionChain


@pytest.fixture(scope="session")
def bs30():
    return BsModel(4000.0, 0.0, 0.3, 30 / 365)


@pytest.fixture(scope="session")
def bs1y():
    return BsModel(4000.0, 0.0, 0.3, 1.0)


@pytest.fixture(scope="session")
def mc_strikes():
    """201 strikes from 0.85 F to 1.10 F in steps of 5."""
    return McDesign().strikes


@pytest.fixture(scope="session")
def bs30_chain(bs30, mc_strikes):
    return OptionChain.from_model(bs30, mc_strikes)


@pytest.fixture(scope="session")
def noisy_bs30_chain(bs30, mc_strikes):
    rng = np.random.default_rng(11)
    return OptionChain.from_model(bs30, mc_strikes, noise=0.025 * rng.standard_normal(mc_strikes.size))


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts, one line per criterion, at the end of the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", {}) if mod else {}
    if lines:
        terminalreporter.section("acceptance criteria")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key])
