import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


@pytest.fixture
def verdict(request, capsys):
    """Record one ``PASS``/``FAIL`` line for an acceptance criterion.

    The line is printed straight away and repeated in the terminal summary,
    so it shows up even when output capture is on.
    """
    lines = request.config.stash[_KEY]

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} [{number:>2}] {title}: {detail}"
        lines.append((number, line))
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
