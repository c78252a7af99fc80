import numpy as np
import pytest

from linfsat.model import BuConvention, FrequencyParams, build_frequency_model
from linfsat.synthesis import synth_fs, synth_of


@pytest.fixture(scope="session")
def freq_model():
    return build_frequency_model(FrequencyParams(), BuConvention.PAPER_LITERAL)


@pytest.fixture(scope="session")
def swing_model():
    return build_frequency_model(FrequencyParams(), BuConvention.SWING_DERIVED)


@pytest.fixture(scope="session")
def fs_design(freq_model):
    return synth_fs(freq_model)


@pytest.fixture(scope="session")
def aug_design(freq_model):
    return synth_fs(freq_model, augmented=True)


@pytest.fixture(scope="session")
def observer(freq_model, aug_design):
    return synth_of(freq_model, aug_design, 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from oracles import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
