ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str = "") -> bool:
    """Log one measurement for an acceptance criterion; returns ``ok``."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        items = ACCEPTANCE[k]
        ok = all(o for o, _ in items)
        bad = [d for o, d in items if not o]
        msg = f"; failing: {bad[0]}" if bad else f"; {items[-1][1]}" if items[-1][1] else ""
        tr.write_line(f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} ({len(items)} measurement(s){msg})")
