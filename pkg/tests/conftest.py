import pytest

from privfunnel.dist import PfInstance

from helpers import ACCEPTANCE_LINES, SKEWED, SYNTH_CHANNEL, UNIFORM


@pytest.fixture
def synth_uniform():
    return PfInstance.from_arrays(UNIFORM, SYNTH_CHANNEL, 4, 0.0)


@pytest.fixture
def synth_skewed():
    return PfInstance.from_arrays(SKEWED, SYNTH_CHANNEL, 4, 0.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
