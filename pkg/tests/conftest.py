import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k, title in mod.CRITERIA.items():
        rows = mod.RESULTS.get(k)
        if not rows:
            tr.write_line(f"[ -- ] {k:2d}. {title}: not run")
            continue
        ok = all(r[1] for r in rows)
        secs = sum(r[3] for r in rows)
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:2d}. {title} ({secs:.1f} s)")
        for label, good, detail, _ in rows:
            tr.write_line(f"         {'ok ' if good else 'BAD'} {label}: {detail}")
