import pytest

from anchorcrc.fixtures import (
    EXAMPLE_ACC1,
    EXAMPLE_ACC2,
    EXAMPLE_CELLS,
    EXAMPLE_DESIGN,
    VALIDATION_STREAM1,
    VALIDATION_STREAM2,
)


@pytest.fixture
def cells():
    return EXAMPLE_CELLS


@pytest.fixture
def design():
    return EXAMPLE_DESIGN


@pytest.fixture
def acc1():
    return EXAMPLE_ACC1


@pytest.fixture
def acc2():
    return EXAMPLE_ACC2


@pytest.fixture
def val1():
    return VALIDATION_STREAM1


@pytest.fixture
def val2():
    return VALIDATION_STREAM2


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    def add(label: str, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append((label, ok, detail))

    return add


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
