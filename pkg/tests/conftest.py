import numpy as np
import pytest

from panel_epa import LossPanel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_panel(rng, n, T, scale=1.0):
    return LossPanel(scale * rng.standard_normal((n, T)))


# acceptance criteria report one line each at the end of the run
ACCEPTANCE = {}


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
