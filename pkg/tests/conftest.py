import pytest

from contactless.store import build_store_net

_VERDICTS = []


@pytest.fixture(scope="session")
def store_net():
    return build_store_net()


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL result for the acceptance summary."""
    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  ({detail})"
        _VERDICTS.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS):
        terminalreporter.write_line(line)
