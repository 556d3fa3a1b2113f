import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gatesynth.errors import InvalidInputError
from gatesynth.model import (
    PAULI,
    PRESETS,
    ControlSystem,
    HermiteBasis,
    PiecewiseConstantBasis,
    ProblemSpec,
    basis_eval,
    build_heisenberg_tgate_problem,
    build_ising_qft_problem,
    coefficient_matrix,
    hermite_functions,
    make_basis,
    pulse_norm,
    qft_matrix,
    random_pulse,
    site_operator,
    synthesize,
)

X, Y, Z, I2 = PAULI["x"], PAULI["y"], PAULI["z"], PAULI["i"]


def test_ising_default_dimensions():
    p = build_ising_qft_problem()
    assert p.system.dim == 32 and p.system.n_controls == 2
    assert p.basis.K == 1000 and p.basis.T == 125.0
    assert isinstance(p.basis, PiecewiseConstantBasis)
    assert p.epsilon == 1e-4
    assert np.allclose(p.target.V, qft_matrix(32))


def test_ising_single_qubit():
    s = build_ising_qft_problem(qubits=1, K=4, T=1).system
    assert np.allclose(s.drift, -3 * Z)
    assert np.allclose(s.controls[0], X) and np.allclose(s.controls[1], Y)


def test_ising_two_qubit_drift_is_diagonal():
    s = build_ising_qft_problem(qubits=2, K=4, T=1).system
    assert np.allclose(s.drift, np.diag([-6, 0, -2, 8]))
    assert np.allclose(s.controls[0], np.kron(X, I2) + np.kron(I2, X))


def test_heisenberg_defaults_and_singlet():
    p = build_heisenberg_tgate_problem()
    assert p.system.dim == 32 and p.system.n_controls == 1
    assert p.basis.K == 1500 and p.basis.T == 90.0 and p.target is None
    assert np.allclose(p.system.controls[0], site_operator({0: "z"}, 5))
    exchange = sum(np.kron(P, P) for P in (X, Y, Z))
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    assert np.allclose(exchange @ singlet, -3 * singlet)
    s2 = build_heisenberg_tgate_problem(qubits=2, K=4, T=1).system
    assert np.isclose(singlet @ (s2.drift - 10 * (np.kron(X, I2) + np.kron(I2, X))) @ singlet, -3)
    s1 = build_heisenberg_tgate_problem(qubits=1, K=4, T=1).system
    assert np.allclose(s1.drift, 10 * X)


def test_heisenberg_accepts_target():
    p = build_heisenberg_tgate_problem(target=np.eye(4), qubits=2, K=4, T=1)
    assert np.allclose(p.target.V, np.eye(4))


@pytest.mark.parametrize("q", [1, 2, 3])
def test_presets_are_hermitian_and_traceless(q):
    for build in PRESETS.values():
        s = build(qubits=q, K=4, T=1.0).system
        assert abs(np.trace(s.drift)) < 1e-12
        for h in (s.drift, *s.controls):
            assert np.allclose(h, h.conj().T)


def test_control_system_validation():
    with pytest.raises(InvalidInputError):
        ControlSystem(np.array([[0, 1], [0, 0]]), X)
    with pytest.raises(InvalidInputError):
        ControlSystem(Z, np.eye(3))
    with pytest.raises(InvalidInputError):
        ControlSystem(np.eye(1), np.eye(1))
    s = ControlSystem(Z, X)
    assert s.n_controls == 1
    assert np.allclose(s.hamiltonian([2.0]), Z + 2 * X)


def test_problem_spec_validation():
    s = ControlSystem(Z, X)
    b = PiecewiseConstantBasis(4, 1.0)
    with pytest.raises(InvalidInputError):
        ProblemSpec(s, b, epsilon=0)
    with pytest.raises(InvalidInputError):
        ProblemSpec(s, b, fluence_bound=-1.0)


def test_pwc_basis_eval():
    b = PiecewiseConstantBasis(4, 1.0)
    assert basis_eval(b, 2, 0.3) == 1.0
    assert basis_eval(b, 2, 0.6) == 0.0
    # right-closed intervals
    assert basis_eval(b, 2, 0.5) == 1.0 and basis_eval(b, 3, 0.5) == 0.0
    with pytest.raises(InvalidInputError):
        basis_eval(b, 0, 0.3)
    with pytest.raises(InvalidInputError):
        basis_eval(b, 5, 0.3)
    t = np.linspace(1e-9, 1.0, 1001)
    assert np.allclose(b.evaluate(t).sum(axis=0), 1.0)
    assert np.allclose(b.gram, np.eye(4) / 4)


def test_hermite_first_function_peaks_at_centre():
    b = HermiteBasis(8, 10.0)
    t = np.linspace(0, 10, 2001)
    v = b.evaluate(t)[0]
    assert np.argmax(v) == 1000
    assert np.isclose(basis_eval(b, 1, 5.0), v.max())


def test_hermite_calibration_reaches_tail_value():
    b = HermiteBasis(16, 10.0)
    # independent check on a denser grid than the calibration uses
    t = np.linspace(-10.0, 0.0, 20001)
    tail = np.max(np.abs(b.evaluate(t)))
    assert abs(tail / 1e-8 - 1) < 0.01
    at_zero = np.max(np.abs(b.evaluate([0.0])))
    assert at_zero <= 1e-8 * 1.01


def test_hermite_functions_orthonormal_on_line():
    x, w = np.polynomial.hermite.hermgauss(80)
    h = hermite_functions(20, x) * np.exp(0.5 * x * x)
    g = (h * w) @ h.T
    assert np.allclose(g, np.eye(20), atol=1e-12)


def test_hermite_gram_is_scaled_identity():
    b = HermiteBasis(16, 10.0)
    g = b.gram
    assert np.allclose(g, g.T)
    assert np.max(np.abs(g / b.scale - np.eye(16))) < 1e-6
    assert np.all(np.linalg.eigvalsh(g) > 0)


def test_hermite_norm_matches_fine_quadrature():
    b = HermiteBasis(12, 7.0)
    a = random_pulse(b, 2, 1.0, 3) * 2.5
    t = np.linspace(0, 7.0, 200001)
    f = synthesize(b, a, t)
    fine = np.sqrt(np.sum(np.trapezoid(f ** 2, t, axis=-1)))
    assert abs(pulse_norm(b, a) / fine - 1) < 1e-6


def test_synthesize_examples():
    b = PiecewiseConstantBasis(5, 1.0)
    assert np.allclose(synthesize(b, np.zeros(10), [0.1, 0.5]), 0)
    a = np.zeros(10)
    a[5 + 2] = 3.0  # control 2, interval 3
    t = np.linspace(0.01, 1, 100)
    f = synthesize(b, a, t)
    assert np.allclose(f[0], 0)
    inside = (t > 0.4) & (t <= 0.6)
    assert np.allclose(f[1][inside], 3.0) and np.allclose(f[1][~inside], 0)


def test_synthesize_matches_direct_sum():
    rng = np.random.default_rng(2)
    for b in (PiecewiseConstantBasis(7, 3.0), HermiteBasis(7, 3.0)):
        a = rng.standard_normal(14)
        t = rng.uniform(0, 3.0, 9)
        direct = np.array([[sum(a[r * 7 + k] * basis_eval(b, k + 1, tt) for k in range(7)) for tt in t]
                           for r in range(2)])
        assert np.allclose(synthesize(b, a, t), direct, atol=1e-13)


def test_coefficient_layout_is_control_major():
    b = PiecewiseConstantBasis(3, 1.0)
    c = coefficient_matrix(b, np.arange(6.0))
    assert np.array_equal(c, [[0, 1, 2], [3, 4, 5]])


def test_pulse_norm_examples():
    b = PiecewiseConstantBasis(4, 1.0)
    assert pulse_norm(b, np.zeros(4)) == 0
    assert np.isclose(pulse_norm(b, np.ones(4)), 1.0)
    a = np.random.default_rng(0).standard_normal(8)
    assert np.isclose(pulse_norm(b, a), np.sqrt(0.25) * np.linalg.norm(a))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 50.0), st.sampled_from(["pwc", "hermite"]))
def test_random_pulse_has_requested_norm(seed, rho, kind):
    b = make_basis(kind, 10, 4.0)
    a = random_pulse(b, 2, rho, seed)
    assert abs(pulse_norm(b, a) - rho) <= 1e-12 * max(1.0, rho)
    assert np.array_equal(a, random_pulse(b, 2, rho, seed))


def test_random_pulse_zero_and_negative():
    b = PiecewiseConstantBasis(10, 1.0)
    assert not np.any(random_pulse(b, 1, 0.0, 1))
    with pytest.raises(InvalidInputError):
        random_pulse(b, 1, -1.0, 1)


def test_random_pulse_directions_nearly_orthogonal():
    b = PiecewiseConstantBasis(100, 1.0)
    ok = 0
    for i in range(100):
        u = random_pulse(b, 2, 1.0, 2 * i)
        v = random_pulse(b, 2, 1.0, 2 * i + 1)
        ok += abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v)) < 0.2
    assert ok >= 99


def test_make_basis_unknown_kind():
    with pytest.raises(InvalidInputError):
        make_basis("spline", 4, 1.0)
    with pytest.raises(InvalidInputError):
        PiecewiseConstantBasis(0, 1.0)
