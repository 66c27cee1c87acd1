import pytest

ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """record(k, ok, note): one outcome towards acceptance criterion k."""
    def record(k: int, ok: bool, note: str = "") -> bool:
        ACCEPTANCE.setdefault(k, []).append((bool(ok), note))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        ok = all(p for p, _ in parts)
        notes = "; ".join(n for _, n in parts if n)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {notes}")
