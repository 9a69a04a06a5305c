"""One test per acceptance criterion; each prints a single PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines live; they
are also written to the terminal summary.
"""

import pytest

from tkflen.acceptance import CRITERIA

_LINES: list[str] = []


@pytest.fixture(scope="module", autouse=True)
def _report(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_sep("=", "acceptance criteria")
        for line in _LINES:
            reporter.write_line(line)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = CRITERIA[number]()
    line = res.line()
    _LINES.append(line)
    print(line)
    assert res.passed, line
