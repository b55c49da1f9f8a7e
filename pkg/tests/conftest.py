"""Shared fixtures: domain specs and a session-wide solve cache.

Grid solves at h = 1/128 cost about a second each and several test
modules need the same fields, so solved extremals are memoized for the
whole session keyed by (shape, p, h).
"""

from __future__ import annotations

import pytest

from sobolev_lab import DomainSpec, build_grid, minimize_quotient

SPECS = {
    "disk": DomainSpec.disk(1.0),
    "square": DomainSpec.rectangle(1.0, 1.0),
    "square2": DomainSpec.rectangle(1.0, 1.0, scale=2.0),
    "ellipse": DomainSpec.ellipse(1.0, 0.5),
    "lshape": DomainSpec.l_shape(1.0, 0.5),
}

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def solve():
    """solve(shape, p, h) -> SobolevResult, memoized for the session."""
    cache: dict[tuple, object] = {}

    def _solve(shape: str, p: float, h: float = 1.0 / 128):
        key = (shape, float(p), float(h))
        if key not in cache:
            grid = build_grid(SPECS[shape], h)
            cache[key] = minimize_quotient(grid, p)
        return cache[key]

    return _solve
