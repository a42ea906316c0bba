import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# Filled by tests/test_acceptance.py; printed once at the end of the run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
