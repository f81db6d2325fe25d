"""Collects the acceptance verdicts so they print even with captured output."""

ACCEPTANCE = []


def record(number: int, passed: bool, detail: str):
    ACCEPTANCE.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {detail}")
