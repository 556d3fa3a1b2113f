import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gatesynth.algebra import (
    dexp,
    dlog,
    gamma,
    gamma_matrix,
    matrix_log_unitary,
    su_dim,
    su_embed,
    su_project,
)
from gatesynth.errors import DegenerateBranchError, InvalidInputError

from conftest import expm, haar, random_antihermitian


@pytest.mark.parametrize("n", [2, 4, 8])
def test_log_round_trip_haar(n):
    for seed in range(100):
        w = haar(n, seed)
        a, frame = matrix_log_unitary(w)
        assert np.linalg.norm(expm(a) - w) <= 1e-9 * np.linalg.norm(w)
        theta = frame.eigvals.imag
        assert np.all(theta > -np.pi) and np.all(theta <= np.pi)
        assert np.allclose(frame.reconstruct(), a, atol=1e-12)
        v = frame.vectors
        assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-12)


def test_log_of_minus_identity_is_on_the_plus_pi_side():
    a, frame = matrix_log_unitary(-np.eye(2))
    assert np.allclose(frame.eigvals, [1j * np.pi, 1j * np.pi])
    assert np.allclose(a, 1j * np.pi * np.eye(2))


def test_log_rejects_non_unitary():
    with pytest.raises(InvalidInputError):
        matrix_log_unitary(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(InvalidInputError):
        matrix_log_unitary(np.ones((2, 3)))


@pytest.mark.parametrize("n", [2, 3])
def test_principal_log_has_minimal_norm_among_single_shifts(n):
    for seed in range(50):
        w = haar(n, seed + 1000)
        a, frame = matrix_log_unitary(w)
        base = np.linalg.norm(a)
        lam, v = frame.eigvals, frame.vectors
        for j, sign in itertools.product(range(n), (-1, 1)):
            shifted = lam.copy()
            shifted[j] += sign * 2j * np.pi
            x = (v * shifted) @ v.conj().T
            assert np.allclose(expm(x), w, atol=1e-9)
            assert base <= np.linalg.norm(x) + 1e-12


def test_centered_branch_is_phase_invariant():
    for seed in range(30):
        w = haar(4, seed)
        ref = su_project(matrix_log_unitary(w, branch="centered")[0])
        for phi in np.linspace(-3, 3, 7):
            got = su_project(matrix_log_unitary(np.exp(1j * phi) * w, branch="centered")[0])
            assert np.allclose(got, ref, atol=1e-10)


def test_centered_branch_traceless_norm_is_minimal():
    # any lift of the phases by multiples of 2 pi must give a larger traceless part
    for seed in range(20):
        w = haar(3, seed)
        a, frame = matrix_log_unitary(w, branch="centered")
        best = np.linalg.norm(su_project(a))
        theta = frame.eigvals.imag
        for shift in itertools.product((-1, 0, 1), repeat=3):
            t = theta + 2 * np.pi * np.array(shift)
            t = t - t.mean()
            assert best <= np.linalg.norm(t) + 1e-12


def test_gamma_examples():
    g = gamma_matrix(np.zeros(2))
    assert np.array_equal(g, np.ones((2, 2)))
    assert np.isclose(gamma(1j * np.pi), 2j / np.pi, atol=1e-15)
    z = 1e-10
    assert abs(gamma(z) - (1 + z / 2)) < 1e-20


def test_gamma_series_matches_direct_formula_in_overlap_window():
    rng = np.random.default_rng(0)
    mags = np.exp(rng.uniform(np.log(1e-9), np.log(1e-7), 200))
    z = mags * np.exp(1j * rng.uniform(0, 2 * np.pi, 200))
    series = 1 + z / 2 + z * z / 6
    direct = np.expm1(z.real) * np.cos(z.imag) - 2 * np.sin(z.imag / 2) ** 2 + 1j * np.exp(z.real) * np.sin(z.imag)
    direct = direct / z
    assert np.max(np.abs(series - direct)) < 1e-12
    assert np.max(np.abs(gamma(z) - direct)) < 1e-12


def test_gamma_nonzero_inside_branch_window():
    y = np.linspace(-2 * np.pi + 1e-3, 2 * np.pi - 1e-3, 2001)
    assert np.min(np.abs(gamma(1j * y))) > 0
    assert abs(gamma(2j * np.pi)) < 1e-15


def test_dexp_trivial_cases(rng):
    d = random_antihermitian(4, rng)
    assert np.allclose(dexp(np.zeros((4, 4)), d), d, atol=1e-14)
    a = random_antihermitian(4, rng)
    assert np.allclose(dexp(a, a), expm(a) @ a, atol=1e-12)


def test_dexp_matches_central_difference(rng):
    h = 1e-5
    for _ in range(50):
        a = random_antihermitian(4, rng)
        d = random_antihermitian(4, rng)
        fd = (expm(a + h * d) - expm(a - h * d)) / (2 * h)
        assert np.max(np.abs(dexp(a, d) - fd)) < 1e-8


def test_dlog_inverts_dexp(rng):
    for seed in range(50):
        w = haar(4, seed)
        log_w, frame = matrix_log_unitary(w)
        d = random_antihermitian(4, rng)
        d /= np.linalg.norm(d)
        back = dlog(w, frame, dexp(log_w, d))
        assert np.max(np.abs(back - d)) < 1e-9


def test_dlog_at_identity_is_identity(rng):
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    _, frame = matrix_log_unitary(np.eye(3))
    assert np.allclose(dlog(np.eye(3), frame, b), b, atol=1e-14)


def test_dlog_matches_derivative_of_log_along_path(rng):
    a0 = random_antihermitian(4, rng)
    a1 = random_antihermitian(4, rng)
    u0 = haar(4, 7)

    def path(s):
        return expm(s * a1) @ expm(0.3 * a0) @ u0

    s, h = 0.4, 1e-5
    w = path(s)
    _, frame = matrix_log_unitary(w)
    deriv = a1 @ w
    fd = (matrix_log_unitary(path(s + h))[0] - matrix_log_unitary(path(s - h))[0]) / (2 * h)
    assert np.max(np.abs(dlog(w, frame, deriv) - fd)) < 1e-7


def test_dlog_raises_at_branch_tie():
    # eigenvalues at +pi and (numerically) -pi lifted: a gap of 2 pi
    from gatesynth.algebra import EigenFrame

    frame = EigenFrame(np.array([1j * np.pi, -1j * np.pi]), np.eye(2, dtype=complex))
    w = np.diag(np.exp(frame.eigvals))
    with pytest.raises(DegenerateBranchError):
        dlog(w, frame, np.eye(2))


def test_su_project_examples(rng):
    assert np.allclose(su_project(1j * np.eye(3)), 0)
    a = random_antihermitian(3, rng)
    assert np.isclose(np.linalg.norm(su_project(a)), np.linalg.norm(a), atol=1e-12)
    b = random_antihermitian(3, rng, traceless=False)
    assert np.allclose(su_embed(su_project(b)), b - np.trace(b) / 3 * np.eye(3), atol=1e-14)


def test_su_embed_basis_is_orthonormal():
    n = 4
    basis = su_embed(np.eye(su_dim(n)))
    gram = np.einsum("aij,bij->ab", basis.conj(), basis)
    assert np.allclose(gram, np.eye(su_dim(n)), atol=1e-14)
    assert np.allclose(su_embed(np.zeros(15)), 0)
    for m in basis:
        assert np.allclose(m, -m.conj().T)
        assert abs(np.trace(m)) < 1e-14


def test_su_embed_wrong_length():
    with pytest.raises(InvalidInputError):
        su_embed(np.zeros(5))
    with pytest.raises(InvalidInputError):
        su_embed(np.zeros(5), 3)


def test_diagonal_coordinates_are_the_helmert_basis():
    a = np.diag([1j, -1j, 0])
    coords = su_project(a)
    assert np.allclose(coords[:6], 0)
    # rows (1,-1,0)/sqrt2 and (1,1,-2)/sqrt6 applied to the imaginary diagonal (1,-1,0)
    assert np.allclose(coords[6:], [np.sqrt(2), 0.0], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 31 - 1))
def test_su_maps_are_adjoint_isometries(n, seed):
    r = np.random.default_rng(seed)
    v = r.standard_normal(su_dim(n))
    a = random_antihermitian(n, r)
    assert np.isclose(np.linalg.norm(su_embed(v, n)), np.linalg.norm(v))
    assert np.allclose(su_project(su_embed(v, n)), v, atol=1e-13)
    # <embed v, a>_F (real part) equals <v, project a>
    lhs = np.real(np.vdot(su_embed(v, n), a))
    assert np.isclose(lhs, v @ su_project(a), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(-np.pi, np.pi))
def test_log_round_trip_property(seed, phi):
    w = np.exp(1j * phi) * haar(3, seed)
    for branch in ("principal", "centered"):
        a, _ = matrix_log_unitary(w, branch=branch)
        assert np.allclose(expm(a), w, atol=1e-9)
        assert np.allclose(a, -a.conj().T, atol=1e-12)
