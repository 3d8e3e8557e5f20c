import pytest

_RESULTS = pytest.StashKey[list]()


@pytest.fixture
def record_acceptance(request):
    """Collect (criterion, passed, detail) lines for the terminal summary."""
    results = request.config.stash.setdefault(_RESULTS, [])
    return results.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(results):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
