"""Pass/fail lines collected by the acceptance tests and printed once per run."""

LINES: list[str] = []


def record(number: int, passed: bool, summary: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {summary}"
    LINES.append(line)
    print(line)
