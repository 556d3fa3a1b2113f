"""Trust-region subproblem for the Newton-Raphson model ``||L + J p||^2``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModelError, InvalidInputError

R_MIN = 1e-12
R_MAX = 1e6
#: relative model error band the radius controller aims for
RATIO_BAND = (0.2, 0.3)


@dataclass(frozen=True)
class SubproblemSolution:
    step: np.ndarray
    lam: float
    model_value: float
    on_boundary: bool


@dataclass(frozen=True)
class RadiusState:
    r: float
    ratio: float = float("nan")
    accepted: bool = True


def _solve_diagonal(d, ghat, r, rank_tol=1e-12):
    """Minimise ``sum d_i x_i^2 + 2 ghat_i x_i`` over ``||x|| <= r`` (``d >= 0``).

    Returns ``(x, lam)`` with ``lam <= 0`` the multiplier of the ball
    constraint in the ``x = -(A - lam I)^{-1} g`` parametrisation.
    """
    d = np.asarray(d, dtype=float)
    ghat = np.asarray(ghat, dtype=float)
    dmax = d.max(initial=0.0)
    pos = d > rank_tol * dmax if dmax > 0 else np.zeros(d.shape, dtype=bool)
    gnorm = np.linalg.norm(ghat)
    if gnorm == 0.0:
        return np.zeros_like(ghat), 0.0
    null_g = np.linalg.norm(ghat[~pos])
    if null_g <= 1e-14 * gnorm:
        x = np.zeros_like(ghat)
        x[pos] = -ghat[pos] / d[pos]
        if np.linalg.norm(x) <= r:
            return x, 0.0
    # boundary: find mu = -lam > 0 with ||x(mu)|| = r, x_i = -g_i / (d_i + mu)
    dd = np.where(pos, d, 0.0)
    g2 = ghat * ghat

    def norm_and_slope(mu):
        den = dd + mu
        xn2 = np.sum(g2 / den ** 2)
        dxn2 = -2.0 * np.sum(g2 / den ** 3)
        return np.sqrt(xn2), dxn2

    lo, hi = 0.0, gnorm / r
    mu = 0.0 if null_g <= 1e-14 * gnorm else min(hi, null_g / r)
    if mu <= 0.0:
        mu = 0.5 * hi
    for _ in range(200):
        xn, dxn2 = norm_and_slope(mu)
        if xn > r:
            lo = mu
        else:
            hi = mu
        phi = 1.0 / xn - 1.0 / r
        if abs(xn - r) <= 1e-14 * r:
            break
        # d(1/||x||)/dmu = -(1/2) ||x||^-3 d||x||^2/dmu
        dphi = -0.5 * dxn2 / xn ** 3
        mu_new = mu - phi / dphi
        if not (lo < mu_new < hi):
            mu_new = 0.5 * (lo + hi)
        if abs(mu_new - mu) <= 1e-16 * max(mu, 1e-300):
            break
        mu = mu_new
    x = -ghat / (dd + mu)
    xn = np.linalg.norm(x)
    if xn > r:
        x *= r / xn
    return x, -mu


def solve_tr_subproblem(A, g, r) -> SubproblemSolution:
    """Global minimiser of ``x^T A x + 2 g^T x`` over ``||x|| <= r`` for PSD ``A``."""
    A = np.asarray(A, dtype=float)
    g = np.asarray(g, dtype=float)
    if not r > 0:
        raise InvalidInputError("trust radius must be positive")
    A = 0.5 * (A + A.T)
    d, v = np.linalg.eigh(A)
    scale = max(np.abs(d).max(initial=0.0), 1e-300)
    if d.size and d[0] < -1e-10 * scale:
        raise InvalidInputError("matrix is not positive semi-definite")
    d = np.clip(d, 0.0, None)
    xhat, lam = _solve_diagonal(d, v.T @ g, r)
    x = v @ xhat
    val = float(x @ A @ x + 2.0 * g @ x)
    return SubproblemSolution(x, float(lam), val, bool(lam < 0))


def newton_step(J, L, r) -> SubproblemSolution:
    """Trust-region Newton step ``argmin_{||p|| <= r} ||J p + L||^2``.

    Under-determined Jacobians (fewer rows than columns) are handled in the
    row space ``p = J^T y`` using the eigen-decomposition of ``J J^T``, so
    the square root of that matrix is only ever applied to its eigenvalues.
    ``model_value`` is ``||J p + L||^2``.
    """
    J = np.asarray(J, dtype=float)
    L = np.asarray(L, dtype=float)
    if not r > 0:
        raise InvalidInputError("trust radius must be positive")
    m, M = J.shape
    if not np.any(J):
        if np.any(L):
            raise DegenerateModelError("all-zero Jacobian with a nonzero residual")
        return SubproblemSolution(np.zeros(M), 0.0, 0.0, False)
    if m >= M:
        d, v = np.linalg.eigh(J.T @ J)
        d = np.clip(d, 0.0, None)
        xhat, lam = _solve_diagonal(d, v.T @ (J.T @ L), r)
        p = v @ xhat
    else:
        d, q = np.linalg.eigh(J @ J.T)
        d = np.clip(d, 0.0, None)
        pos = d > 1e-12 * d.max()
        sq = np.where(pos, np.sqrt(np.where(pos, d, 0.0)), 0.0)
        lhat = q.T @ L
        zhat, lam = _solve_diagonal(np.where(pos, d, 0.0), sq * lhat, r)
        yhat = np.zeros_like(zhat)
        yhat[pos] = zhat[pos] / sq[pos]
        p = J.T @ (q @ yhat)
        pn = np.linalg.norm(p)
        if pn > r:
            p *= r / pn
    resid = J @ p + L
    return SubproblemSolution(p, float(lam), float(resid @ resid), bool(lam < 0))


def adapt_radius(state: RadiusState, model_decrease: float, actual_decrease: float,
                 on_boundary: bool = True) -> RadiusState:
    """Update the trust radius from the relative error of the model.

    The tracked quantity is ``(model_decrease - actual_decrease) /
    |actual_decrease|``, the relative error of the predicted change in squared
    error.  Below the band the radius doubles (only if the step was limited
    by it), above the band it halves.  A step that does not decrease the
    error is rejected and the radius quartered.
    """
    r = state.r
    if not actual_decrease > 0:
        return RadiusState(float(np.clip(r / 4.0, R_MIN, R_MAX)), float("inf"), False)
    ratio = (model_decrease - actual_decrease) / abs(actual_decrease)
    lo, hi = RATIO_BAND
    if ratio < lo and on_boundary:
        r = 2.0 * r
    elif ratio > hi:
        r = r / 2.0
    return RadiusState(float(np.clip(r, R_MIN, R_MAX)), float(ratio), True)
