import numpy as np
import pytest

from dephasim.model import LatticeSpec, build_hamiltonian, ground_state, sample_disorder


@pytest.fixture
def small_chain():
    """12-site disordered chain (W = 0.2) and its ground state."""
    spec = LatticeSpec(12, 1.0, 0.2)
    h = build_hamiltonian(spec, sample_disorder(spec, seed=5))
    psi, energy = ground_state(h)
    return h, psi, energy


def random_state(n, rng):
    z = rng.normal(size=n) + 1j * rng.normal(size=n)
    return z / np.linalg.norm(z)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """record(number, passed, detail) stores one acceptance line for the terminal summary."""

    def record(number, passed, detail):
        _CRITERIA[str(number)] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
