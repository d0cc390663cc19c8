"""Shared fixtures, deterministic-id helpers, and reporting hooks."""

from __future__ import annotations

import os

import pytest

from tapeloop.core import (
    Step,
    StepMetadata,
    Tape,
    TapeMetadata,
    builtin_registry,
)
from tapeloop.llm.db import ENV_DB_PATH


@pytest.fixture(autouse=True, scope="session")
def _default_db_in_tmp(tmp_path_factory):
    """Keep the default call database out of the working tree.

    Calls are recorded by default; a test that builds a pool without
    naming a database must not leave llm_calls.sqlite in the repository.
    """
    previous = os.environ.get(ENV_DB_PATH)
    os.environ[ENV_DB_PATH] = str(tmp_path_factory.mktemp("default-db") / "llm_calls.sqlite")
    yield
    if previous is None:
        os.environ.pop(ENV_DB_PATH, None)
    else:
        os.environ[ENV_DB_PATH] = previous


def fixed_id(n: int) -> str:
    """A stable UUID4-shaped id: tests need reproducible bytes, not entropy."""
    return f"00000000-0000-4000-8000-{n:012d}"


def fixed_step(kind: str, category: str, payload: dict, n: int, **meta) -> Step:
    return Step(
        kind=kind,
        category=category,
        payload=payload,
        metadata=StepMetadata(id=fixed_id(n), **meta),
    )


def fixed_tape(steps, n: int = 999, **meta) -> Tape:
    return Tape(steps=tuple(steps), metadata=TapeMetadata(id=fixed_id(n), **meta))


@pytest.fixture
def registry():
    """A private registry so kind registrations never leak between tests."""
    return builtin_registry()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance test, for auditing at a glance."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, ()):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid or getattr(report, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1]
            rows.append((name, "PASS" if outcome == "passed" else "FAIL"))
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, verdict in sorted(rows):
        label = name.removeprefix("test_").replace("_", " ")
        terminalreporter.write_line(f"{verdict}  {label}")
