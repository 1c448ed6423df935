"""Collects one line per acceptance criterion for the terminal summary."""

LINES = []


def record(criterion, passed, detail):
    line = f"[criterion {criterion}] {'PASS' if passed else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)
    return passed
