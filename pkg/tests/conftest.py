import pytest

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
INFO: list[str] = []


@pytest.fixture
def record():
    def _record(n: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return bool(ok)
    return _record


@pytest.fixture
def info():
    def _info(line: str) -> None:
        INFO.append(line)
        print(line)
    return _info


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE and not INFO:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    for line in INFO:
        tr.write_line(f"info: {line}")
