import numpy as np
import pytest

from granular_sph.model import MaterialParams, SimConfig


@pytest.fixture
def material():
    return MaterialParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_config(**kw):
    base = dict(d0=0.01, h=0.013, dt=1e-4)
    base.update(kw)
    return SimConfig(**base)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
