import numpy as np
import pytest

from crackbench.core import write_synthetic_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synth3(tmp_path_factory):
    """Three small synthetic patches with a manifest."""
    out = tmp_path_factory.mktemp("synth3")
    return write_synthetic_dataset(out, 3, seed=5)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, format_line
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(format_line(n))
