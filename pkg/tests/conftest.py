from pathlib import Path

import pytest

from mvdlite.ifc import get_schema, read_spf

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def ifc4():
    return get_schema("IFC4")


@pytest.fixture(scope="session")
def ifc2x3():
    return get_schema("IFC2X3")


@pytest.fixture(scope="session")
def fix_a():
    return read_spf(FIXTURES / "fix_a.ifc")


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


_ACCEPTANCE = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
