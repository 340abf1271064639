import pytest

from transient_verify.lorenz import LorenzParams, State3, fixed_points

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def params_r20():
    return LorenzParams(10.0, 20.0, 8.0 / 3.0)


@pytest.fixture
def fps_r20(params_r20):
    return fixed_points(params_r20)


@pytest.fixture
def reference_ic():
    return State3(2.0, 1.0, 5.42857)


@pytest.fixture
def criterion():
    """Record one acceptance line; the assertion stays in the test."""

    def record(name: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
