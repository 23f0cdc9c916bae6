import hypothesis

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("dev", max_examples=200, deadline=None)
hypothesis.settings.load_profile("ci")

import pytest

_CRITERIA: dict[str, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record a one-line outcome for an acceptance criterion."""
    name = request.node.name

    def record(label: str, detail: str):
        _CRITERIA[name] = (label, detail)

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.name in _CRITERIA:
        label, detail = _CRITERIA[item.name]
        _CRITERIA[item.name] = (label, f"{'PASS' if rep.passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, line in sorted(_CRITERIA.values()):
        terminalreporter.write_line(f"{label}: {line}")
