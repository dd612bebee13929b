import sys
import warnings

import numpy as np
import pytest


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _quiet_small_sample_warning():
    """Tests intentionally run tiny datasets; the size heuristic is tested
    explicitly in test_robust."""
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="n = .* below the heuristic floor")
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(0)
