"""Linear algebra on the unitary group and its Lie algebra.

Matrices are plain complex ``numpy`` arrays.  Anti-Hermitian matrices are the
Lie algebra u(N); the traceless ones, su(N), are given real orthonormal
coordinates by :func:`su_project` / :func:`su_embed`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import DegenerateBranchError, InvalidInputError

#: series switch point for gamma(z) = (e^z - 1)/z
GAMMA_SERIES_THRESHOLD = 1e-8
#: smallest admissible |Gamma| entry when dividing in dlog
GAMMA_DIVISION_FLOOR = 1e-12


@dataclass(frozen=True)
class EigenFrame:
    """Eigen-decomposition ``A = vectors @ diag(eigvals) @ vectors^H``."""

    eigvals: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.vectors
        return (v * self.eigvals) @ v.conj().T


def antihermitian(a: np.ndarray) -> np.ndarray:
    """Return ``(A - A^H) / 2``."""
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a - np.swapaxes(a, -1, -2).conj())


def unitarity_residual(w: np.ndarray) -> float:
    w = np.asarray(w)
    n = w.shape[-1]
    return float(np.linalg.norm(w.conj().T @ w - np.eye(n)))


def check_unitary(w, tol: float = 1e-10) -> np.ndarray:
    """Validate a square unitary matrix; tolerance is scaled by sqrt(N)."""
    w = np.asarray(w, dtype=complex)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {w.shape}")
    res = unitarity_residual(w)
    if not np.isfinite(res) or res > tol * np.sqrt(w.shape[0]):
        raise InvalidInputError(f"matrix is not unitary (residual {res:.3e})")
    return w


def matrix_log_unitary(w, branch: str = "principal", tol: float = 1e-10):
    """Matrix logarithm of a unitary matrix.

    Parameters
    ----------
    w : (N, N) complex array
        Unitary input.
    branch : {"principal", "centered"}
        ``"principal"`` puts every eigenvalue of the result at ``i*theta`` with
        ``theta`` in (-pi, pi].  ``"centered"`` picks, among all logarithms, the
        one whose traceless part has the smallest Frobenius norm; it is
        insensitive to a global phase on ``w``.

    Returns
    -------
    log_w : (N, N) complex array
        Anti-Hermitian with ``expm(log_w) == w``.
    frame : EigenFrame
        Eigen-decomposition of ``log_w``.
    """
    w = check_unitary(w, tol)
    t, z = scipy.linalg.schur(w, output="complex")
    mu = np.diag(t)
    theta = np.angle(mu)
    theta[theta <= -np.pi] += 2 * np.pi
    if branch == "centered":
        theta = _lift_centered(theta)
    elif branch != "principal":
        raise InvalidInputError(f"unknown branch {branch!r}")
    lam = 1j * theta
    log_w = antihermitian((z * lam) @ z.conj().T)
    return log_w, EigenFrame(lam, z)


def _lift_centered(theta: np.ndarray) -> np.ndarray:
    n = theta.size
    order = np.argsort(theta, kind="stable")
    s = theta[order]
    best_j, best_cost = n - 1, np.inf
    for j in range(n):
        lifted = np.concatenate([s[j + 1:], s[:j + 1] + 2 * np.pi])
        cost = np.sum((lifted - lifted.mean()) ** 2)
        if cost < best_cost * (1 - 1e-12) - 1e-300:
            best_j, best_cost = j, cost
    lifted_sorted = s.copy()
    lifted_sorted[:best_j + 1] += 2 * np.pi
    mean = lifted_sorted.mean()
    lifted_sorted -= 2 * np.pi * np.ceil((mean - np.pi) / (2 * np.pi))
    out = np.empty(n)
    out[order] = lifted_sorted
    return out


def _expm1c(z: np.ndarray) -> np.ndarray:
    """Accurate ``exp(z) - 1`` for complex ``z``."""
    x, y = z.real, z.imag
    re = np.expm1(x) * np.cos(y) - 2.0 * np.sin(0.5 * y) ** 2
    im = np.exp(x) * np.sin(y)
    return re + 1j * im


def gamma(z) -> np.ndarray:
    """Elementwise ``(e^z - 1) / z`` continuously extended by ``gamma(0) = 1``."""
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.reshape(-1)
    small = np.abs(z) < GAMMA_SERIES_THRESHOLD
    safe = np.where(small, 1.0, z)
    out = _expm1c(safe) / safe
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs * zs / 6.0
    return out.reshape(shape)


def gamma_matrix(eigvals) -> np.ndarray:
    """``Gamma[r, s] = gamma(lambda_s - lambda_r)``."""
    lam = np.asarray(eigvals, dtype=complex)
    g = gamma(lam[..., None, :] - lam[..., :, None])
    n = lam.shape[-1]
    g[..., np.arange(n), np.arange(n)] = 1.0
    return g


def eig_antihermitian(a) -> EigenFrame:
    """Eigen-decomposition of an anti-Hermitian matrix through ``eigh(i*A)``."""
    mu, q = np.linalg.eigh(1j * antihermitian(a))
    return EigenFrame(-1j * mu, q)


def dexp(a, d) -> np.ndarray:
    """Directional derivative of ``expm`` at ``a`` along ``d``."""
    frame = eig_antihermitian(a)
    q, lam = frame.vectors, frame.eigvals
    qh = q.conj().T
    inner = gamma_matrix(lam) * (qh @ np.asarray(d, dtype=complex) @ q)
    exp_a = (q * np.exp(lam)) @ qh
    return exp_a @ q @ inner @ qh


def dlog(w, frame: EigenFrame, b) -> np.ndarray:
    """Derivative of the matrix logarithm at ``w`` applied to ``b``.

    ``frame`` must be the eigenframe of ``log(w)`` returned by
    :func:`matrix_log_unitary`.  Accepts a stack of ``b`` matrices.
    """
    lam_vec = frame.vectors
    g = gamma_matrix(frame.eigvals)
    if np.min(np.abs(g)) < GAMMA_DIVISION_FLOOR:
        raise DegenerateBranchError("eigenvalue gap of log(W) at the 2*pi branch tie")
    w = np.asarray(w, dtype=complex)
    y = w.conj().T @ np.asarray(b, dtype=complex)
    return dlog_from_generator(lam_vec, g, y)


def dlog_from_generator(vectors, g, y) -> np.ndarray:
    """``Lambda ((Lambda^H y Lambda) / Gamma) Lambda^H`` where ``y = W^H B``."""
    vh = vectors.conj().T
    return vectors @ ((vh @ y @ vectors) / g) @ vh


def su_dim(n: int) -> int:
    return n * n - 1


@lru_cache(maxsize=None)
def _helmert(n: int) -> np.ndarray:
    """Rows: orthonormal basis of the hyperplane orthogonal to all-ones."""
    h = np.zeros((n - 1, n))
    for l in range(1, n):
        h[l - 1, :l] = 1.0
        h[l - 1, l] = -float(l)
        h[l - 1] /= np.sqrt(l * (l + 1))
    return h


@lru_cache(maxsize=None)
def _upper_indices(n: int):
    return np.triu_indices(n, k=1)


def su_project(a) -> np.ndarray:
    """Real orthonormal su(N) coordinates of the traceless part of ``a``.

    Layout: for each strictly-upper entry ``(j, k)`` in row-major order the pair
    ``sqrt(2) Re a_jk, sqrt(2) Im a_jk``; then the ``N - 1`` Helmert coordinates
    of the imaginary diagonal.  Works on stacks ``(..., N, N)``.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    iu, ju = _upper_indices(n)
    upper = a[..., iu, ju]
    off = np.empty(a.shape[:-2] + (2 * upper.shape[-1],))
    off[..., 0::2] = np.sqrt(2.0) * upper.real
    off[..., 1::2] = np.sqrt(2.0) * upper.imag
    diag = np.diagonal(a, axis1=-2, axis2=-1).imag
    return np.concatenate([off, diag @ _helmert(n).T], axis=-1)


def su_embed(v, n: int | None = None) -> np.ndarray:
    """Traceless anti-Hermitian matrix with coordinates ``v`` (inverse of :func:`su_project`)."""
    v = np.asarray(v, dtype=float)
    m = v.shape[-1]
    if n is None:
        n = int(round(np.sqrt(m + 1)))
    if su_dim(n) != m:
        raise InvalidInputError(f"coordinate vector of length {m} is not N^2 - 1")
    iu, ju = _upper_indices(n)
    npair = iu.size
    out = np.zeros(v.shape[:-1] + (n, n), dtype=complex)
    upper = (v[..., 0:2 * npair:2] + 1j * v[..., 1:2 * npair:2]) / np.sqrt(2.0)
    out[..., iu, ju] = upper
    out[..., ju, iu] = -upper.conj()
    diag = v[..., 2 * npair:] @ _helmert(n)
    out[..., np.arange(n), np.arange(n)] = 1j * diag
    return out
