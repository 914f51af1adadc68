import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from starksense.qudit import CircuitParams  # noqa: E402
from starksense.transmon import CooperPairBoxParams  # noqa: E402


@pytest.fixture
def circuit():
    return CircuitParams(omega_q=5.0, gamma=0.4)


@pytest.fixture
def device():
    return CooperPairBoxParams(E_C=0.1977, E_J=15.5)


_ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
