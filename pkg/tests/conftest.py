import pytest

# (criterion, passed, detail) rows filled in by the acceptance module
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: (int("".join(c for c in r[0] if c.isdigit())), r[0])):
        terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def report():
    def _report(key, ok, detail):
        ACCEPTANCE_LINES.append((str(key), bool(ok), detail))
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _report
