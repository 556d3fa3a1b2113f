import sys
import numpy as np
import pytest
import scipy.linalg
from scipy.stats import unitary_group

from gatesynth.model import build_ising_qft_problem
from gatesynth.solver import reachable_target


def haar(n, seed):
    return unitary_group.rvs(n, random_state=np.random.default_rng(seed))


def random_antihermitian(n, rng, traceless=True):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = 0.5 * (a - a.conj().T)
    if traceless:
        a -= np.trace(a) / n * np.eye(n)
    return a


def expm(a):
    return scipy.linalg.expm(a)


def desk_problem(K=32, T=8.0, target_seed=100, target_norm=2.0, fluence_bound=20.0, basis="pwc"):
    """Two-qubit Ising chain with a target reachable by a smooth pulse."""
    p = build_ising_qft_problem(qubits=2, K=K, T=T, basis=basis, fluence_bound=fluence_bound)
    p.target = reachable_target(p, target_seed, target_norm)
    return p


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
