import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kte.convex_cost import PowerCost, RadialCost
from kte.expr import parse

settings.register_profile("kte", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kte")


@pytest.fixture(scope="session")
def quartic():
    """Radial cost V(s) = s^2 + s^4 in 1D."""
    return RadialCost(parse("s^2+s^4"), dim=1)


@pytest.fixture(scope="session")
def quartic2d():
    return RadialCost(parse("s^2+s^4"), dim=2)


@pytest.fixture(scope="session")
def square():
    return PowerCost(2, dim=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# --- acceptance summary ------------------------------------------------------

ACCEPTANCE = pytest.StashKey[dict]()
CRITERIA = range(1, 9)


@pytest.fixture
def acceptance(request):
    """``record(criterion, part, ok, detail)`` for the end-of-run acceptance table."""
    table = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(criterion, part, ok, detail=""):
        table.setdefault(criterion, []).append((part, bool(ok), detail))
        print(f"criterion {criterion} [{part}]: {'PASS' if ok else 'FAIL'} {detail}")
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(ACCEPTANCE, None)
    if not table:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in CRITERIA:
        parts = table.get(k)
        if not parts:
            tr.write_line(f"criterion {k}: NOT RUN")
            continue
        bad = [p for p, ok, _ in parts if not ok]
        status = "PASS" if not bad else "FAIL"
        tr.write_line(f"criterion {k}: {status}" + (f" (failing: {', '.join(bad)})" if bad else ""))
        for part, ok, detail in parts:
            tr.write_line(f"    {part}: {'PASS' if ok else 'FAIL'} {detail}")
