import os

import pytest

from stablebranch import _backend


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    if request.param == "numba" and not _backend.HAVE_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setenv(_backend.ENV_VAR, request.param)
    return request.param


@pytest.fixture
def numpy_backend(monkeypatch):
    monkeypatch.setenv(_backend.ENV_VAR, "numpy")


def pytest_report_header(config):
    return f"kernel backend: {os.environ.get(_backend.ENV_VAR, 'numba (default)')}"


_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Record one summary line; all lines are printed at the end of the session."""
    lines = request.config.stash.setdefault(_LINES, [])
    return lines.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
