"""Collects the acceptance verdict lines and repeats them at the end of the run."""

VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(VERDICTS, key=_order):
        terminalreporter.write_line(line)


def _order(line: str):
    head = line.split(":", 1)[0]
    digits = "".join(ch for ch in head if ch.isdigit())
    return (int(digits) if digits else 99, "supplementary" in head, line)
