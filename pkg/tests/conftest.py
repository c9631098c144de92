import re

import numpy as np
import pytest

from xosketch import Valuation

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_outcomes: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        _outcomes[num] = ("PASS" if report.outcome == "passed" else "FAIL", report.nodeid.split("::")[-1], detail)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_outcomes):
        status, name, detail = _outcomes[num]
        line = f"[{status}] criterion {num}: {name}"
        terminalreporter.write_line(f"{line} -- {detail}" if detail else line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def v_small():
    """Clauses {0,1} and {2} on three items — the running example."""
    return Valuation.from_sets(3, [{0, 1}, {2}])
