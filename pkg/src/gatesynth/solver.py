"""Newton-Raphson driver, initial-norm selection and the BFGS baseline."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, NoFiniteConditioningError
from .model import ProblemSpec, pulse_norm, random_pulse, smooth_random_pulse
from .objective import TargetSpec, evaluate, evaluate_propagation, ill_conditioning, jacobian
from .propagation import propagate
from .trustregion import R_MIN, RadiusState, adapt_radius, newton_step

log = logging.getLogger(__name__)

CONVERGED = "Converged"
MAX_ITERATIONS = "MaxIterations"
STALLED = "Stalled"

#: consecutive rejections at the minimum radius before giving up
MAX_REJECTIONS_AT_RMIN = 10


@dataclass
class IterationRecord:
    index: int
    gate_error: float
    geodesic_error: float
    pulse_norm: float
    radius: float
    ratio: float
    accepted: bool
    wall_seconds: float
    propagations: int

    def deterministic(self) -> tuple:
        """All fields except the wall clock."""
        return (self.index, self.gate_error, self.geodesic_error, self.pulse_norm,
                self.radius, self.ratio, self.accepted, self.propagations)


@dataclass
class SolveReport:
    records: list
    final_a: np.ndarray
    status: str
    seed: Optional[int] = None
    problem: str = ""
    algorithm: str = "newton"
    meta: dict = field(default_factory=dict)

    @property
    def accepted(self) -> list:
        return [rec for rec in self.records if rec.accepted]

    @property
    def iterations(self) -> int:
        """Number of accepted iterations (the initial evaluation is index 0)."""
        return self.accepted[-1].index if self.records else 0

    @property
    def final_error(self) -> float:
        return self.accepted[-1].gate_error

    @property
    def final_norm(self) -> float:
        return self.accepted[-1].pulse_norm

    @property
    def wall_seconds(self) -> float:
        return self.records[-1].wall_seconds if self.records else 0.0

    def iterations_to(self, eps: float) -> Optional[int]:
        for rec in self.accepted:
            if rec.gate_error <= eps:
                return rec.index
        return None

    def time_to(self, eps: float) -> Optional[float]:
        for rec in self.accepted:
            if rec.gate_error <= eps:
                return rec.wall_seconds
        return None


def _check_start(problem: ProblemSpec, a0) -> np.ndarray:
    a0 = np.array(a0, dtype=float).ravel()
    if a0.size != problem.n_params:
        raise InvalidInputError(f"expected {problem.n_params} parameters, got {a0.size}")
    return a0


def initial_radius(a0: np.ndarray, ill: float, floor: float = 1e-3) -> float:
    return max(min(np.linalg.norm(a0) / 10.0, ill), floor)


def newton_raphson_solve(problem: ProblemSpec, a0, max_iter: int = 100, seed=None,
                         radius: Optional[float] = None, steps: Optional[int] = None) -> SolveReport:
    """Trust-region Newton-Raphson iteration on the projected log residual.

    Stops when the gate error reaches ``problem.epsilon`` (Converged), after
    ``max_iter`` accepted iterations (MaxIterations) or after repeated
    rejections at the minimum radius (Stalled).  Every trial step is
    recorded; rejected ones carry ``accepted=False`` and the index of the
    last accepted iterate.
    """
    a = _check_start(problem, a0)
    basis = problem.basis
    t0 = time.perf_counter()
    ev = evaluate(problem, a, steps=steps)
    nprop = 1
    records = [IterationRecord(0, ev.gate_error, ev.geodesic_error, pulse_norm(basis, a),
                               float("nan"), float("nan"), True, time.perf_counter() - t0, nprop)]

    def report(status):
        return SolveReport(records, a, status, seed, problem.name, "newton")

    if ev.gate_error <= problem.epsilon:
        return report(CONVERGED)
    r0 = radius if radius is not None else initial_radius(a, ill_conditioning(ev.jacobian))
    state = RadiusState(r0)
    n = 0
    stuck = 0
    while n < max_iter:
        J, L = ev.jacobian.J, ev.residual.coords
        err2 = float(L @ L)
        sol = newton_step(J, L, state.r)
        trial_a = a + sol.step
        prop = propagate(problem.system, basis, trial_a, steps)
        nprop += 1
        trial = evaluate_propagation(problem, prop, with_jacobian=False)
        new_err2 = trial.geodesic_error ** 2
        used_r = state.r
        state = adapt_radius(state, err2 - sol.model_value, err2 - new_err2, sol.on_boundary)
        if state.accepted:
            n += 1
            a = trial_a
            trial.jacobian = jacobian(problem.target, prop, basis, trial.residual)
            ev = trial
            stuck = 0
            records.append(IterationRecord(n, ev.gate_error, ev.geodesic_error, pulse_norm(basis, a),
                                           used_r, state.ratio, True, time.perf_counter() - t0, nprop))
            log.debug("iter %d err %.3e r %.3e", n, ev.gate_error, used_r)
            if ev.gate_error <= problem.epsilon:
                return report(CONVERGED)
        else:
            records.append(IterationRecord(n, trial.gate_error, trial.geodesic_error,
                                           pulse_norm(basis, trial_a), used_r, state.ratio, False,
                                           time.perf_counter() - t0, nprop))
            stuck = stuck + 1 if used_r <= R_MIN * (1 + 1e-9) else 0
            if stuck >= MAX_REJECTIONS_AT_RMIN:
                return report(STALLED)
    return report(MAX_ITERATIONS)


# --- BFGS baseline -------------------------------------------------------------------------

def _wolfe_line_search(fg, x, f0, g0, d, alpha0, c1=1e-4, c2=0.9, max_evals=40):
    """Strong Wolfe line search by bracketing and bisection-zoom.

    ``fg(x)`` returns ``(value, gradient, extra)``.  Returns
    ``(alpha, f, g, extra, evals)`` or ``None`` on failure.
    """
    slope0 = g0 @ d
    if slope0 >= 0:
        return None
    evals = 0
    a_prev, f_prev, slope_prev = 0.0, f0, slope0
    alpha = alpha0
    lo = hi = None
    while evals < max_evals:
        f, g, extra = fg(x + alpha * d)
        evals += 1
        slope = g @ d
        if lo is None and hi is None:
            if f > f0 + c1 * alpha * slope0 or (a_prev > 0 and f >= f_prev):
                lo, hi = (a_prev, f_prev, slope_prev), (alpha, f, slope)
            elif abs(slope) <= -c2 * slope0:
                return alpha, f, g, extra, evals
            elif slope >= 0:
                lo, hi = (alpha, f, slope), (a_prev, f_prev, slope_prev)
            else:
                a_prev, f_prev, slope_prev = alpha, f, slope
                alpha *= 2.0
                continue
        else:
            if f > f0 + c1 * alpha * slope0 or f >= lo[1]:
                hi = (alpha, f, slope)
            else:
                if abs(slope) <= -c2 * slope0:
                    return alpha, f, g, extra, evals
                if slope * (hi[0] - lo[0]) >= 0:
                    hi = lo
                lo = (alpha, f, slope)
        # cubic-free zoom: safeguarded quadratic interpolation with bisection fallback
        (a1, f1, s1), (a2, f2, _) = lo, hi
        denom = 2.0 * (f2 - f1 - s1 * (a2 - a1))
        trial = a1 - s1 * (a2 - a1) ** 2 / denom if denom != 0 else 0.5 * (a1 + a2)
        lo_b, hi_b = sorted((a1, a2))
        if not (lo_b + 0.1 * (hi_b - lo_b) <= trial <= hi_b - 0.1 * (hi_b - lo_b)):
            trial = 0.5 * (a1 + a2)
        alpha = trial
    return None


def bfgs_minimize(fg, x0, max_iter=100, gtol=0.0, callback=None, init_step=None):
    """Plain BFGS on ``fg(x) -> (f, grad, extra)`` with inverse-Hessian updates.

    ``callback(k, x, f, g, extra, evals)`` is called after every accepted
    iteration and may return True to stop.  Returns ``(x, f, status)``.
    """
    x = np.array(x0, dtype=float)
    f, g, extra = fg(x)
    n = x.size
    if np.linalg.norm(g) <= gtol:
        return x, f, "critical"
    H = None
    scale0 = init_step / np.linalg.norm(g) if init_step else 1.0
    for k in range(1, max_iter + 1):
        d = -(g * scale0 if H is None else H @ g)
        ls = _wolfe_line_search(fg, x, f, g, d, 1.0)
        if ls is None:
            return x, f, "linesearch"
        alpha, f_new, g_new, extra, evals = ls
        s = alpha * d
        y = g_new - g
        sy = s @ y
        if H is None:
            H = np.eye(n) * (sy / (y @ y) if sy > 0 else scale0)
        if sy > 1e-300:
            rho = 1.0 / sy
            hy = H @ y
            H = H + ((sy + y @ hy) * rho * rho) * np.outer(s, s) - rho * (np.outer(hy, s) + np.outer(s, hy))
        x, f, g = x + s, f_new, g_new
        if callback is not None and callback(k, x, f, g, extra, evals):
            return x, f, "callback"
        if np.linalg.norm(g) <= gtol:
            return x, f, "critical"
    return x, f, "maxiter"


def bfgs_grape_solve(problem: ProblemSpec, a0, max_iter: int = 200, seed=None,
                     steps: Optional[int] = None) -> SolveReport:
    """Minimise the squared geodesic error by BFGS with gradient ``2 J^T L``."""
    a0 = _check_start(problem, a0)
    basis = problem.basis
    t0 = time.perf_counter()
    counter = {"prop": 0}

    def fg(x):
        ev = evaluate(problem, x, steps=steps)
        counter["prop"] += 1
        L = ev.residual.coords
        return float(L @ L), 2.0 * ev.jacobian.J.T @ L, ev

    f0, g0, ev0 = fg(a0)
    records = [IterationRecord(0, ev0.gate_error, ev0.geodesic_error, pulse_norm(basis, a0),
                               float("nan"), float("nan"), True, time.perf_counter() - t0, counter["prop"])]
    final = {"a": a0}

    def report(status):
        return SolveReport(records, final["a"], status, seed, problem.name, "bfgs")

    if ev0.gate_error <= problem.epsilon:
        return report(CONVERGED)
    if not np.any(g0):
        return report(STALLED)

    def callback(k, x, f, g, ev, evals):
        final["a"] = x
        records.append(IterationRecord(k, ev.gate_error, ev.geodesic_error, pulse_norm(basis, x),
                                       float("nan"), float("nan"), True,
                                       time.perf_counter() - t0, counter["prop"]))
        return ev.gate_error <= problem.epsilon

    first = initial_radius(a0, ill_conditioning(ev0.jacobian))
    # reuse the first evaluation
    cache = {"x": a0, "val": (f0, g0, ev0)}

    def fg_cached(x):
        if x is cache["x"]:
            return cache["val"]
        return fg(x)

    _, _, status = bfgs_minimize(fg_cached, a0, max_iter, callback=callback, init_step=first)
    if status == "callback":
        return report(CONVERGED)
    if status == "maxiter":
        return report(MAX_ITERATIONS)
    return report(STALLED)


# --- initial norm selection ----------------------------------------------------------------

def default_norm_grid(problem: ProblemSpec, B: Optional[float], grid_size: int) -> np.ndarray:
    if B is not None:
        if not B > 0:
            raise InvalidInputError("fluence bound must be positive")
        return np.geomspace(B / 100.0, 0.8 * B, grid_size)
    sys = problem.system
    center = np.linalg.norm(sys.drift, 2) * np.sqrt(sys.n_controls * problem.basis.T) / (2 * np.pi)
    return np.geomspace(center / 100.0, center * 100.0, grid_size)


def ill_conditioning_curve(problem: ProblemSpec, norms, samples_per_norm: int = 3, seed=0) -> np.ndarray:
    """Ill-conditioning at random pulses, shape ``(len(norms), samples_per_norm)``."""
    norms = np.atleast_1d(np.asarray(norms, dtype=float))
    R = problem.system.n_controls
    seeds = np.random.SeedSequence(seed).spawn(norms.size * samples_per_norm)
    out = np.empty((norms.size, samples_per_norm))
    for i, rho in enumerate(norms):
        for j in range(samples_per_norm):
            a = random_pulse(problem.basis, R, rho, seeds[i * samples_per_norm + j])
            out[i, j] = ill_conditioning(evaluate(problem, a).jacobian)
    return out


def find_best_initial_norm(problem: ProblemSpec, B: Optional[float] = None, grid_size: int = 12,
                           samples_per_norm: int = 3, seed=0, return_curve: bool = False):
    """Pulse norm minimising the median ill-conditioning on a geometric grid.

    With a fluence bound ``B`` the grid spans ``[B/100, 4B/5]``.
    """
    if B is None:
        B = problem.fluence_bound
    norms = default_norm_grid(problem, B, grid_size)
    curve = ill_conditioning_curve(problem, norms, samples_per_norm, seed)
    med = np.median(curve, axis=1)
    if not np.any(np.isfinite(med)):
        raise NoFiniteConditioningError("no finite ill-conditioning on the norm grid")
    best = float(norms[int(np.argmin(np.where(np.isfinite(med), med, np.inf)))])
    if return_curve:
        return best, norms, curve
    return best


def reachable_target(problem: ProblemSpec, seed, norm: float, projector: str = "su") -> TargetSpec:
    """Target produced by a random smooth pulse of the given norm, so an exact solution exists."""
    a = smooth_random_pulse(problem.basis, problem.system.n_controls, norm, seed)
    U = propagate(problem.system, problem.basis, a).final
    return TargetSpec(U, projector)
