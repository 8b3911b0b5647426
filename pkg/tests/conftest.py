from __future__ import annotations

import pytest

from helpers import two_room_problem, two_room_scene


@pytest.fixture
def two_rooms():
    return two_room_problem()


@pytest.fixture
def three_rooms():
    return two_room_problem(extra_room=True)


@pytest.fixture
def two_room_graph():
    return two_room_scene()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
