import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# acceptance lines, keyed by criterion number; filled in by test_acceptance
ACCEPTANCE: dict = {}


def record(number: int, ok: bool, label: str, detail: str = "") -> bool:
    ACCEPTANCE[number] = f"[{number:2d}] {'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
    print(ACCEPTANCE[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
