import math

import numpy as np
import pytest

from radonkit import angles_linspace, forward, make_parallel, shepp_logan

# criterion number -> list of (passed, detail), filled by test_acceptance
ACCEPTANCE = {}
N_CRITERIA = 10


def record(criterion, passed, detail):
    """Log one sub-check of an acceptance criterion and return ``passed``."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in range(1, N_CRITERIA + 1):
        parts = ACCEPTANCE.get(key)
        if not parts:
            terminalreporter.write_line(f"criterion {key:>2}: NOT RUN")
            continue
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(d if ok else f"{d} [FAIL]" for ok, d in parts)
        terminalreporter.write_line(f"criterion {key:>2}: {status}  {detail}")


@pytest.fixture(scope="session")
def phantom512():
    return shepp_logan(512)


@pytest.fixture(scope="session")
def geom512():
    """Reference parallel configuration: 512 angles over [0, pi), 725 cells."""
    return make_parallel(512, angles_linspace(0, np.pi, 512), det_count=math.ceil(512 * math.sqrt(2)))


@pytest.fixture(scope="session")
def sino512(geom512, phantom512):
    return forward(geom512, phantom512)


@pytest.fixture(scope="session")
def phantom64():
    return shepp_logan(64, dtype=np.float64)


def smooth_blob(n, cx=5.0, cy=-3.0, sigma=8.0):
    c = np.arange(n) - n / 2 + 0.5
    x, y = np.meshgrid(c, -c)
    return np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma ** 2))[None]
