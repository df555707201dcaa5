from __future__ import annotations

import importlib.util
import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent / "fixtures"

_acceptance: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def groups10_lines() -> list[str]:
    return (FIXTURES / "groups10.jsonl").read_text(encoding="utf-8").splitlines()


@pytest.fixture
def judge_index() -> dict[str, str]:
    return json.loads((FIXTURES / "judge_store" / "index.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def fixture_builder():
    """The script that generated the committed fixtures, loaded as a module."""
    spec = importlib.util.spec_from_file_location("build_fixtures", FIXTURES / "build_fixtures.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


@pytest.fixture
def acceptance():
    """Record one acceptance criterion, then assert it."""

    def check(number: int, name: str, ok: bool, detail: str = "") -> None:
        _acceptance[number] = (name, bool(ok), detail)
        assert ok, f"acceptance {number} ({name}) failed: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        name, ok, detail = _acceptance[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {name}: {detail}")
