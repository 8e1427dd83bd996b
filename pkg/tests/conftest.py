import pytest

ACCEPT_LINES: list[str] = []


@pytest.fixture
def report():
    def emit(n: int, ok: bool, text: str) -> None:
        line = f"[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {text}"
        ACCEPT_LINES.append(line)
        print(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPT_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPT_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
