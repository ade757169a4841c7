import math

import numpy as np
import pytest

from nmlcomp import Luckiness, make_model

E = math.e
BAND = Luckiness.box([1.0], [E])

# filled by test_acceptance, printed once at the end of the session
ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def band():
    return BAND


@pytest.fixture(scope="session")
def aniso():
    return make_model("aniso-gauss-2d")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  {line}")
