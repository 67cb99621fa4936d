import numpy as np
import pytest


class FixedStream:
    """Stand-in for PathStream that replays given uniforms and normals."""

    def __init__(self, uniforms=(), normals=()):
        self.u = np.asarray(uniforms, dtype=float)
        self.z = np.asarray(normals, dtype=float)

    def exponential_uniforms(self, start, count):
        out = np.full(count, 0.5)
        avail = self.u[start:start + count]
        out[: avail.size] = avail
        return out

    def gaussians(self, start, count):
        return self.z[start:start + count]


@pytest.fixture
def fixed_stream():
    return FixedStream


ACCEPTANCE_LINES = []


def record_verdict(number, title, ok, detail):
    """Store and print one acceptance line; the terminal summary repeats them all."""
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
