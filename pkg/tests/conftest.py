import numpy as np
import pytest

from degparab.solver import ManufacturedSolution

ACCEPTANCE = []


def lifted_solution(T):
    """``u* = e^-tau cos z (e^-t - (1 - t/T) - (t/T) e^-T)``, zero at both
    strip ends; the affine correction is harmonic."""
    eT = np.exp(-T)

    def prof(t):
        return np.exp(-t) - (1 - t / T) - (t / T) * eT, -np.exp(-t) + (1 - eT) / T, np.exp(-t)

    def u(tau, t, z):
        return np.exp(-tau) * np.cos(z) * prof(t)[0]

    def grad(tau, t, z):
        g, g1, _ = prof(t)
        return [np.exp(-tau) * np.cos(z) * g1, -np.exp(-tau) * np.sin(z) * g]

    def hess(tau, t, z):
        g, g1, g2 = prof(t)
        e = np.exp(-tau)
        off = -e * np.sin(z) * g1
        return [[e * np.cos(z) * g2, off], [off, -e * np.cos(z) * g]]

    return ManufacturedSolution(u, lambda tau, t, z: -u(tau, t, z), grad, hess, "lifted")


@pytest.fixture
def lifted():
    return lifted_solution


@pytest.fixture
def record():
    def _record(number, name, ok, detail=""):
        ACCEPTANCE.append((number, name, bool(ok), detail))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail}")
