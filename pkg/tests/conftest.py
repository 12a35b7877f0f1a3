import numpy as np
import pytest
from hypothesis import settings

from holiv.dynamics import HyperbolicMap

settings.register_profile("holiv", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("holiv")

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """Record one acceptance line: report(number, passed, detail)."""

    def put(n: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"acceptance {n}: {'PASS' if ok else 'FAIL'} {detail}")

    return put


@pytest.fixture(scope="session")
def cat():
    return HyperbolicMap.cat()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{n:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
