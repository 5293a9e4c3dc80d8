import pytest

# verdict lines appended by the acceptance suite, echoed after the run
VERDICTS: list[str] = []


@pytest.fixture(scope="session")
def verdicts():
    return VERDICTS


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
