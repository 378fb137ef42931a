"""Shared fixtures: frozen oracle values, model zoo handles, rng helpers."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

import fourier_audit as fa

FROZEN_PATH = Path(__file__).parent / "frozen" / "derived_values.json"


@pytest.fixture(scope="session")
def frozen() -> dict:
    """Brute-force oracle values; regenerate with tests/oracles/gen_frozen.py."""
    return json.loads(FROZEN_PATH.read_text())


@pytest.fixture()
def maj3():
    return fa.build_model("maj3", n=3)


@pytest.fixture()
def maj3in8():
    return fa.build_model("maj3", n=8)


@pytest.fixture()
def tree_in8():
    """The fixed depth-2 stump tree of the frozen oracle, embedded in n=8."""
    minus_leaf = fa.StumpNode(coordinate=2, when_minus=-1, when_plus=1)
    plus_leaf = fa.StumpNode(coordinate=3, when_minus=1, when_plus=-1)
    root = fa.StumpNode(coordinate=1, when_minus=minus_leaf, when_plus=plus_leaf)
    return fa.DecisionStumpTree(8, root)


@pytest.hookimpl(hookwrapper=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    yield
    rows = []
    for status, label in (("passed", "PASS"), ("failed", "FAIL"),
                          ("error", "FAIL"), ("skipped", "SKIP")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if getattr(rep, "when", "call") != "call" and status != "skipped":
                continue
            name = nodeid.split("::")[-1]
            rows.append((name, label))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, label in sorted(rows):
            terminalreporter.write_line(f"{label}  {name}")
