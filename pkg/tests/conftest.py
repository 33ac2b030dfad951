from pathlib import Path

import pytest

import xstencil.dialects  # noqa: F401  (registers every dialect and pass)
import xstencil.transforms  # noqa: F401
from xstencil.ir import parse_module

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load(name: str):
    return parse_module((FIXTURES / name).read_text())


@pytest.fixture
def jacobi():
    return load("jacobi_1d.xir")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
