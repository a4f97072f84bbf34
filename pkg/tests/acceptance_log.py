"""One pass/fail line per acceptance criterion, collected for the terminal summary."""

RESULTS: dict[int, str] = {}


def record(number: int, passed: bool, message: str) -> str:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {message}"
    RESULTS[number] = line
    print(line)
    return line
