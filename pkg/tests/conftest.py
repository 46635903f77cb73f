import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

CRITERIA = []  # (number, passed, detail) appended by the acceptance tests


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(CRITERIA):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
