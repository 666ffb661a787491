"""Session-wide gradient audit and the acceptance verdict lines."""
import pytest

from blab.solvers import AUDIT

VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one ``PASS``/``FAIL`` line for an acceptance criterion and print it."""

    def emit(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else "")
        VERDICTS.append(line)
        print(line)
        return ok

    return emit


def pytest_sessionfinish(session, exitstatus):
    if AUDIT.failures:
        print(f"\ngradient audit: {len(AUDIT.failures)} failures, first {AUDIT.failures[:5]}")
        session.exitstatus = pytest.ExitCode.TESTS_FAILED


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance")
        for line in VERDICTS:
            terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"gradient audit: {AUDIT.checked} fields checked, {len(AUDIT.failures)} failures"
    )
