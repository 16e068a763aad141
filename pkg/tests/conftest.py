import time

import pytest

_LINES = pytest.StashKey[list]()


class Criterion:
    """Times one acceptance criterion, collects its checks and emits a single PASS/FAIL line."""

    def __init__(self, lines: list, number: int, name: str, limit: float):
        self.lines, self.number, self.name, self.limit = lines, number, name, limit
        self.checks = []

    def check(self, label: str, value, ok: bool):
        self.checks.append((label, value, bool(ok)))

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, typ, exc, tb):
        dt = time.perf_counter() - self.t0
        ok = exc is None and all(c[2] for c in self.checks) and dt < self.limit
        parts = [f"{label} {value}{'' if good else ' (!)'}" for label, value, good in self.checks]
        if exc is not None:
            parts.append(f"error {type(exc).__name__}: {exc}")
        line = (f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'} {self.name}: " + "; ".join(parts)
                + f" [{dt:.1f} s, limit {self.limit:g} s]")
        print(line)
        self.lines.append((self.number, line))
        if exc is None:
            assert ok, line
        return False


@pytest.fixture()
def criterion(request):
    lines = request.config.stash.setdefault(_LINES, [])

    def make(number: int, name: str, limit: float) -> Criterion:
        return Criterion(lines, number, name, limit)

    return make


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
