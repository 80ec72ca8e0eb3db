import contextlib
import time

import pytest

CRITERIA = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    @contextlib.contextmanager
    def record(number, title):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            CRITERIA.append((number, "FAIL", title, time.perf_counter() - start, f"{type(exc).__name__}: {exc}"))
            raise
        CRITERIA.append((number, "PASS", title, time.perf_counter() - start, ""))

    def note(number, status, title, seconds, detail=""):
        """An extra summary line that is reported but not asserted."""
        CRITERIA.append((number, status, title, seconds, detail))

    record.note = note
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, seconds, detail in sorted(CRITERIA):
        line = f"{status} criterion {number}: {title} ({seconds:.1f}s)"
        if detail:
            line += f" -- {detail.splitlines()[0][:200]}"
        terminalreporter.write_line(line)
