import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("lab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


#: one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    def record(number, title, ok, detail):
        ACCEPTANCE_LINES.append(f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
