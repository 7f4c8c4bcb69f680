import numpy as np
import pytest

from isingtomo import ising, tomography

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record(criterion: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((criterion, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


def random_density_matrix(rng, dim=4, rank=None, real=False):
    rank = rank or dim
    a = rng.normal(size=(dim, rank))
    if not real:
        a = a + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def projector_set():
    return tomography.two_qubit_projector_set()


@pytest.fixture(scope="session")
def tmat(projector_set):
    return tomography.measurement_matrix(projector_set)


def bell_instance(kind, tmat, projector_set, scale=2.0):
    rho = tomography.bell_state(kind)
    m = tomography.forward_probabilities(rho, projector_set)
    qf = ising.quadratic_form(tmat, m, scale=scale)
    return rho, m, qf, ising.ising_coefficients(qf)


@pytest.fixture(scope="session")
def phi_plus(tmat, projector_set):
    return bell_instance("correlated", tmat, projector_set)


@pytest.fixture(scope="session")
def psi_plus(tmat, projector_set):
    return bell_instance("anti_correlated", tmat, projector_set)
