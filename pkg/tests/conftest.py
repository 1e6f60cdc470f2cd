import numpy as np
import pytest

from gprterrain.simulate import CorpusConfig, generate_corpus


@pytest.fixture(scope="session")
def default_corpus():
    return generate_corpus(CorpusConfig())


@pytest.fixture(scope="session")
def small_corpus():
    """16 radargrams (4 per class), wide enough for 32-trace windows."""
    return generate_corpus(CorpusConfig(n_radargrams=16, total_traces=16 * 80, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
