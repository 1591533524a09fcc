import pytest

from hfqed.fock import FiberSpace, Masses
from hfqed.hydrogen import InternalBasis
from hfqed.photons import CutoffWindow, build_grid


def make_space(sigma=0.5, Lambda=1.0, n_int=2, n_max=1, n_angular=8, masses=Masses()):
    grid = build_grid(CutoffWindow(sigma, Lambda), 1, n_angular)
    return FiberSpace(grid, InternalBasis(masses.reduced, n_int), masses, n_max)


@pytest.fixture(scope="session")
def small_space():
    """One dyadic shell, 16 modes, one photon at most: dimension 340."""
    return make_space()


ACCEPTANCE_LINES: list[str] = []


def report(line: str) -> None:
    """Record one acceptance line; echoed again in the terminal summary."""
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
