"""Test configuration and fixtures."""

from collections.abc import Callable, Generator
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from kbsm.machine import MachineDef, get_machine
from kbsm.main import app
from kbsm.ndmachine import SearchBudget
from kbsm.settings import get_settings


@pytest.fixture
def client() -> Generator[TestClient, None, None]:
    """Synchronous test client for the HTTP surface."""
    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture
def base() -> MachineDef:
    return get_machine("base")


@pytest.fixture
def arith() -> MachineDef:
    return get_machine("arith")


@pytest.fixture
def generous() -> SearchBudget:
    """A search budget large enough for every small example."""
    return SearchBudget(max_total_steps=100_000, max_depth=10_000)


@pytest.fixture
def write_file(tmp_path: Path) -> Callable[[str, str], str]:
    """Write `text` to a file named `name` under tmp_path and return its path."""

    def write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write


@pytest.fixture
def fresh_settings(monkeypatch: pytest.MonkeyPatch) -> Generator[pytest.MonkeyPatch, None, None]:
    """Set KBSM_ variables through the returned monkeypatch; the settings cache is reset around the test."""
    get_settings.cache_clear()
    yield monkeypatch
    monkeypatch.undo()
    get_settings.cache_clear()
