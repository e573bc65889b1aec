import json
from math import pi
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from oscswap.hamiltonians import solve_params

TWO_PI = 2 * pi

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def frozen():
    return json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def reference_solution():
    return solve_params(TWO_PI * 60e6, TWO_PI * 1.5e9, TWO_PI * 1.25e9, TWO_PI * 0.25e9, 1)


@pytest.fixture(scope="session")
def reference_solution_xtalk():
    return solve_params(
        TWO_PI * 60e6,
        TWO_PI * 1.5e9,
        TWO_PI * 1.25e9,
        TWO_PI * 0.25e9,
        1,
        omega_a=TWO_PI * 7.5e9,
        omega_b=TWO_PI * 4.5e9,
        crosstalk_ratio=0.1,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance report: test_acceptance.py appends (criterion, ok, detail); entries sharing a
# criterion are merged into one line
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    merged: dict[str, tuple[bool, list[str]]] = {}
    for crit, ok, detail in ACCEPTANCE_LINES:
        prev_ok, details = merged.get(crit, (True, []))
        merged[crit] = (prev_ok and ok, details + [detail])
    terminalreporter.section("acceptance criteria")
    for crit in sorted(merged, key=lambda c: int(c.split()[0])):
        ok, details = merged[crit]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {crit}: {'; '.join(details)}")
