from __future__ import annotations

import sys
from importlib.resources import files
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stochpath.textfmt import parse_model, parse_query, parse_strategy  # noqa: E402

CORPUS = files("stochpath") / "corpus"

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE: list = []


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text(encoding="utf-8")


def load_model(name):
    return parse_model(corpus_text(name))


def load_strategy(name):
    return parse_strategy(corpus_text(name))


def load_query(name):
    return parse_query(corpus_text(name))


@pytest.fixture(scope="session")
def fig1():
    return load_model("commute.mdp")


@pytest.fixture(scope="session")
def fig2():
    return load_model("commute2d.mdp")


@pytest.fixture(scope="session")
def fig3():
    return load_model("commute-env.mdp")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {crit}: {detail}")
