import pytest

# (number, passed, detail) recorded by acceptance checks, echoed at the end of the run
VERDICTS = []


@pytest.fixture
def verdict():
    def record(number, passed, detail=""):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        VERDICTS.append((number, passed, line))
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, _, line in sorted(VERDICTS):
            terminalreporter.write_line(line)
