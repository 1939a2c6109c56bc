import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from covertsec.coding import encoder_from_decoder
from covertsec.fixtures import FIGHTER_A, FIGHTER_B, FIGHTER_C, FIGHTER_D_D
from covertsec.lti import StateSpaceSystem

settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")


@pytest.fixture
def fighter():
    return StateSpaceSystem(FIGHTER_A, FIGHTER_B, FIGHTER_C, 0.5)


@pytest.fixture
def example1():
    I2 = np.eye(2)
    return StateSpaceSystem(I2, I2, I2)


@pytest.fixture(scope="session")
def published_scheme():
    Dd = np.array(FIGHTER_D_D)
    return encoder_from_decoder(np.eye(4), Dd, -Dd, Dd, exact=True, label="published")


def random_system(rng, n, m, p, radius=0.9, density=1.0):
    def draw(shape):
        M = rng.standard_normal(shape)
        return M * (rng.random(shape) < density) if density < 1.0 else M

    A = draw((n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    if rho > 1e-12:
        A *= radius / rho
    return StateSpaceSystem(A, draw((n, m)), draw((p, n)))


@st.composite
def systems(draw, max_n=4, max_m=3, max_p=3):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    p = draw(st.integers(1, max_p))
    seed = draw(st.integers(0, 2**32 - 1))
    density = draw(st.sampled_from([1.0, 0.5]))
    return random_system(np.random.default_rng(seed), n, m, p, density=density)


@st.composite
def index_subsets(draw, size, min_size=0):
    picked = draw(st.sets(st.integers(1, size), min_size=min_size, max_size=size))
    return tuple(sorted(picked))


_criteria: dict = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        num = int(name.split("_")[2])
        _criteria[num] = ("PASS" if report.passed else "FAIL", name[len("test_criterion_") + 2:])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        verdict, label = _criteria[num]
        terminalreporter.write_line(f"{verdict} criterion {num}: {label}")
