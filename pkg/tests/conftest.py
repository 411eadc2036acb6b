"""Shared pytest hooks: the acceptance suite reports one verdict line per criterion."""

import pytest

_VERDICTS = []


@pytest.fixture(scope="session")
def verdict():
    """Record ``PASS``/``FAIL`` for a criterion and return the boolean."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        _VERDICTS.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS, key=lambda t: t[0]):
        terminalreporter.write_line(line)
