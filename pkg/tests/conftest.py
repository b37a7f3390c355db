import sys
from pathlib import Path

import pytest

# tests import the oracles and scene generator as plain modules
sys.path.insert(0, str(Path(__file__).parent))

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def verdict(request, capsys):
    """Record one acceptance line, show it immediately, then assert on it."""
    lines = request.config.stash[_LINES_KEY]

    def record(tag: str, ok: bool, detail: str):
        line = f"{tag}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
