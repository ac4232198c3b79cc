import contextlib
from pathlib import Path

import pytest

from coppar_check.files import read_history
from coppar_check.litmus import store_buffer

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance_lines: list[str] = []


@contextlib.contextmanager
def criterion(name: str):
    """Record a PASS/FAIL line for an acceptance criterion, re-raising any failure."""
    try:
        yield
    except BaseException as exc:
        _acceptance_lines.append(f"FAIL  {name}: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}")
        raise
    _acceptance_lines.append(f"PASS  {name}")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def sb():
    return store_buffer()


@pytest.fixture
def sb_file():
    return FIXTURES / "store_buffer.jsonl"


@pytest.fixture
def sb_from_file(sb_file):
    return read_history(sb_file)
