"""Shared pytest hooks: the acceptance suite prints one verdict line per criterion."""

ACCEPTANCE: dict = {}


def record(criterion: int, title: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[criterion] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
