"""Shared fixtures for the bayescfr test suite."""

from __future__ import annotations

import pytest

from bayescfr.games.core import GameSpec, collapse_types
from bayescfr.games.poker import build_kuhn, build_leduc


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "integration: mark integration tests")
    config.addinivalue_line("markers", "slow: mark slow tests")


@pytest.fixture(scope="session")
def kuhn_normal() -> GameSpec:
    return build_kuhn("pure-n")


@pytest.fixture(scope="session")
def kuhn_mixed() -> GameSpec:
    return build_kuhn("mixed-4")


@pytest.fixture(scope="session")
def kuhn_collapsed(kuhn_normal: GameSpec) -> GameSpec:
    return collapse_types(kuhn_normal)


@pytest.fixture(scope="session")
def leduc_normal() -> GameSpec:
    return build_leduc("pure-n")
