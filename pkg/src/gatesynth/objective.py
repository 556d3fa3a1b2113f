"""Root-finding residual, error metrics, Jacobian and ill-conditioning."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import kernels
from .algebra import (
    GAMMA_DIVISION_FLOOR,
    EigenFrame,
    check_unitary,
    gamma_matrix,
    matrix_log_unitary,
    su_dim,
    su_embed,
    su_project,
)
from .errors import DegenerateBranchError, InvalidInputError
from .model import PiecewiseConstantBasis, PulseBasis, ProblemSpec
from .propagation import PropagationResult, propagate

LOBATTO_WEIGHTS = (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0)


class TargetSpec:
    """Target gate together with the projection applied to the residual.

    ``projector="su"`` compares full unitaries up to global phase.
    ``projector="subsystem"`` treats ``V = W (x) I_env`` and ignores any
    evolution acting on the environment factor alone.
    """

    def __init__(self, V, projector: str = "su", system_dim: Optional[int] = None,
                 env_dim: Optional[int] = None):
        self.V = check_unitary(np.asarray(V, dtype=complex), tol=1e-8)
        n = self.V.shape[0]
        if projector not in ("su", "subsystem"):
            raise InvalidInputError(f"unknown projector {projector!r}")
        self.projector = projector
        if projector == "subsystem":
            if env_dim is None and system_dim is None:
                raise InvalidInputError("subsystem projector needs system_dim or env_dim")
            env_dim = env_dim if env_dim is not None else n // system_dim
            system_dim = system_dim if system_dim is not None else n // env_dim
            if system_dim * env_dim != n:
                raise InvalidInputError("system_dim * env_dim must equal N")
        self.system_dim = system_dim
        self.env_dim = env_dim

    @classmethod
    def subsystem(cls, W, env_dim: int) -> "TargetSpec":
        """Target ``W (x) I`` on a system coupled to an ``env_dim`` environment."""
        W = np.asarray(W, dtype=complex)
        return cls(np.kron(W, np.eye(env_dim)), "subsystem", W.shape[0], env_dim)

    @property
    def dim(self) -> int:
        return self.V.shape[0]

    @property
    def residual_dim(self) -> int:
        if self.projector == "su":
            return su_dim(self.dim)
        return su_dim(self.dim) - su_dim(self.env_dim)

    @cached_property
    def _complement(self) -> np.ndarray:
        """Orthonormal basis (columns) of su(N) coordinates orthogonal to I (x) su(env)."""
        de, ds = self.env_dim, self.system_dim
        env_basis = su_embed(np.eye(su_dim(de)), de)
        lifted = np.stack([np.kron(np.eye(ds), e) for e in env_basis]) / np.sqrt(ds)
        c = su_project(lifted).T  # (m_full, m_env), orthonormal columns
        proj = np.eye(su_dim(self.dim)) - c @ c.T
        vals, vecs = np.linalg.eigh(proj)
        return vecs[:, vals > 0.5][:, ::-1]

    def project(self, coords: np.ndarray) -> np.ndarray:
        """Map su(N) coordinates ``(..., N^2 - 1)`` to residual coordinates."""
        if self.projector == "su":
            return coords
        return coords @ self._complement

    def with_phase(self, phi: float) -> "TargetSpec":
        out = object.__new__(TargetSpec)
        out.__dict__.update({k: v for k, v in self.__dict__.items() if k != "_complement"})
        out.V = np.exp(1j * phi) * self.V
        return out


@dataclass
class Residual:
    """``coords`` of the projected logarithm of ``W = V^H U(T)``."""

    coords: np.ndarray
    W: np.ndarray
    log: np.ndarray
    frame: EigenFrame

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))


@dataclass
class JacobianData:
    """Real Jacobian ``J`` (rows: residual coordinates, columns: parameters)."""

    J: np.ndarray
    residual: Residual


def residual(target: TargetSpec, prop: PropagationResult) -> Residual:
    """Projected logarithm of ``V^H U(T)``.

    The logarithm branch is the one whose traceless part is smallest, so the
    coordinate norm is the phase-insensitive geodesic distance and a global
    phase on ``V`` leaves the residual unchanged.
    """
    W = target.V.conj().T @ prop.final
    log_w, frame = matrix_log_unitary(W, branch="centered", tol=1e-8)
    return Residual(target.project(su_project(log_w)), W, log_w, frame)


def gate_error_hs(U, V) -> float:
    """``min_phi ||U - e^{i phi} V|| / (2 sqrt(N))`` in closed form."""
    U = np.asarray(U)
    V = np.asarray(V)
    n = U.shape[0]
    overlap = abs(np.vdot(V, U)) / n
    return float(np.sqrt(max(0.0, 0.5 * (1.0 - overlap))))


def gate_error(target: TargetSpec, U) -> float:
    """Gate error for the target's projector.

    For a subsystem target the environment unitary is optimised out as well:
    ``max_A |Tr((W (x) A)^H U)|`` is the trace norm of the partial trace of
    ``(W^H (x) I) U`` over the system factor.
    """
    if target.projector == "su":
        return gate_error_hs(U, target.V)
    ds, de = target.system_dim, target.env_dim
    m = (target.V.conj().T @ np.asarray(U)).reshape(ds, de, ds, de)
    reduced = np.einsum("iaib->ab", m)
    overlap = np.sum(np.linalg.svd(reduced, compute_uv=False)) / target.dim
    return float(np.sqrt(max(0.0, 0.5 * (1.0 - overlap))))


def _log_frame_divisor(res: Residual) -> np.ndarray:
    g = gamma_matrix(res.frame.eigvals)
    if np.min(np.abs(g)) < GAMMA_DIVISION_FLOOR:
        raise DegenerateBranchError("eigenvalue gap of log(W) at the 2*pi branch tie")
    return g


def _generators_pwc(prop: PropagationResult, lam_vecs: np.ndarray) -> np.ndarray:
    """Closed-form per-interval integrals in the frame of ``log W``."""
    h = prop.dt
    x = np.swapaxes(prop.vectors, -1, -2).conj() @ prop.cumulative[:-1] @ lam_vecs
    return kernels.pwc_generators(prop.vectors, prop.energies, prop.system.controls, x, h)


def _generators_lobatto(prop: PropagationResult, basis: PulseBasis, lam_vecs: np.ndarray) -> np.ndarray:
    """Composite three-point Lobatto (Simpson) quadrature of ``U^H (-i H_r) b_k U``."""
    S = prop.n_steps
    n = prop.system.dim
    h = prop.dt
    at_grid = prop.cumulative @ lam_vecs
    at_mid = prop.midpoints @ lam_vecs
    b = basis.step_node_values(S)  # (S, 3, K)
    wl, wm, wr = (h * w * b[:, j, :] for j, w in enumerate(LOBATTO_WEIGHTS))
    out = np.empty((prop.system.n_controls, basis.K, n, n), dtype=complex)
    for r, hr in enumerate(prop.system.controls):
        a = -1j * hr
        fg = kernels.sandwich(at_grid, np.broadcast_to(a, at_grid.shape)).reshape(S + 1, n * n)
        fm = kernels.sandwich(at_mid, np.broadcast_to(a, at_mid.shape)).reshape(S, n * n)
        y = wl.T @ fg[:-1] + wm.T @ fm + wr.T @ fg[1:]
        out[r] = y.reshape(basis.K, n, n)
    return out


def jacobian(target: TargetSpec, prop: PropagationResult, basis: PulseBasis,
             res: Optional[Residual] = None, method: str = "auto") -> JacobianData:
    """Jacobian of the residual coordinates with respect to the coefficients.

    Column ``(r, k)`` is ``P dlog_W(V^H dU(T)/d alpha_rk)``.  With
    ``W^H V^H dU(T) = int U^H (-i H_r) b_k U dt`` only that integral is needed;
    it is taken in closed form per interval for piecewise constant bases
    (``method="pwc"``) or by Lobatto quadrature (``method="lobatto"``).
    """
    if res is None:
        res = residual(target, prop)
    lam_vecs = res.frame.vectors
    g = _log_frame_divisor(res)
    if method == "auto":
        pwc = isinstance(basis, PiecewiseConstantBasis) and prop.vectors is not None \
            and prop.n_steps == basis.K
        method = "pwc" if pwc else "lobatto"
    if method == "pwc":
        gen = _generators_pwc(prop, lam_vecs)
    elif method == "lobatto":
        gen = _generators_lobatto(prop, basis, lam_vecs)
    else:
        raise InvalidInputError(f"unknown Jacobian method {method!r}")
    cols = lam_vecs @ (gen / g) @ lam_vecs.conj().T
    coords = target.project(su_project(cols))  # (R, K, m)
    J = coords.reshape(-1, coords.shape[-1]).T
    if not np.all(np.isfinite(J)):
        raise ArithmeticError("non-finite Jacobian entries")
    return JacobianData(np.ascontiguousarray(J), res)


def minimum_norm_solution(J, L, floor: float = 1e-14):
    """Least-norm ``p`` with ``J p = -L`` through ``eig(J J^T)``.

    Returns ``(p, outside)`` where ``outside`` is the relative size of the
    part of ``L`` that ``J`` cannot reach.
    """
    J = np.asarray(J, dtype=float)
    L = np.asarray(L, dtype=float)
    m = J.shape[0]
    mm = J @ J.T
    d, q = np.linalg.eigh(mm)
    tr = np.trace(mm)
    keep = d > floor * tr / m if tr > 0 else np.zeros(m, dtype=bool)
    lhat = q.T @ L
    y = q[:, keep] @ (lhat[keep] / d[keep])
    nl = np.linalg.norm(L)
    outside = np.linalg.norm(lhat[~keep]) / nl if nl > 0 else 0.0
    return -J.T @ y, outside


def ill_conditioning(jd_or_J, L=None, range_tol: float = 1e-6) -> float:
    """``||J^T (J J^T)^{-1} L||``; ``inf`` when ``L`` leaves the range of ``J``."""
    if isinstance(jd_or_J, JacobianData):
        J, L = jd_or_J.J, jd_or_J.residual.coords
    else:
        J = jd_or_J
    if np.linalg.norm(L) == 0:
        return 0.0
    p, outside = minimum_norm_solution(J, L)
    if outside > range_tol:
        return float("inf")
    return float(np.linalg.norm(p))


@dataclass
class Evaluation:
    prop: PropagationResult
    residual: Residual
    gate_error: float
    jacobian: Optional[JacobianData] = None

    @property
    def geodesic_error(self) -> float:
        return self.residual.norm


def evaluate(problem: ProblemSpec, a, with_jacobian: bool = True, steps: Optional[int] = None) -> Evaluation:
    """Propagate, then compute residual, gate error and optionally the Jacobian."""
    if problem.target is None:
        raise InvalidInputError("problem has no target gate")
    a = np.asarray(a, dtype=float)
    if a.size != problem.n_params:
        raise InvalidInputError(f"expected {problem.n_params} parameters, got {a.size}")
    return evaluate_propagation(problem, propagate(problem.system, problem.basis, a, steps),
                                with_jacobian)


def evaluate_propagation(problem: ProblemSpec, prop: PropagationResult,
                         with_jacobian: bool = True) -> Evaluation:
    """Residual, gate error and optionally the Jacobian for a finished propagation."""
    res = residual(problem.target, prop)
    jd = jacobian(problem.target, prop, problem.basis, res) if with_jacobian else None
    return Evaluation(prop, res, gate_error(problem.target, prop.final), jd)
