"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

RESULTS = {}


def report(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f"  ({detail})" if detail else "")
    RESULTS[number] = line
    print(line)
    return ok
