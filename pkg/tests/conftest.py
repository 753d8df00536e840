import numpy as np
import pytest

from tetraslit import sicsearch

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def reference():
    return sicsearch.reference_solution()


@pytest.fixture(scope="session")
def balanced_delta(reference):
    return sicsearch.balanced_delta_for(reference)


@pytest.fixture(scope="session")
def reference_povm(reference, balanced_delta):
    return sicsearch.build_povm(reference, balanced_delta)


@pytest.fixture(scope="session")
def reference_layout(reference, balanced_delta):
    return sicsearch.layout_for(reference, balanced_delta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def check(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" -- {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
