import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# Verdict lines collected by the acceptance suite, echoed after the run so
# they are visible without ``-s``.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
