from __future__ import annotations

import pytest

from agglineage import Relation, make_salaries_demo


@pytest.fixture(scope="session")
def salaries() -> Relation:
    """The bundled 1,012,100-record demo dataset; built once per session."""
    return make_salaries_demo()


@pytest.fixture
def toy5() -> Relation:
    return Relation.build(
        "toy5",
        [("W", "numeric"), ("Tag", "categorical")],
        {"W": [1.0, 2.0, 3.0, 4.0, 5.0], "Tag": ["t0", "t1", "t2", "t3", "t4"]},
    )


@pytest.fixture
def toy10() -> Relation:
    values = [9.0, 1.0, 7.0, 3.0, 8.0, 2.0, 6.0, 4.0, 10.0, 5.0]
    return Relation.build(
        "toy10",
        [("W", "numeric"), ("Tag", "categorical")],
        {"W": values, "Tag": [f"r{i}" for i in range(10)]},
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance criterion lines after the test summary."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
