"""Time stepping of ``dU/dt = -i H[f(t)] U`` on a uniform grid."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .model import ControlSystem, PiecewiseConstantBasis, PulseBasis, coefficient_matrix

#: Gauss-Legendre nodes on [0, 1] used by the fourth order Magnus step
MAGNUS_NODES = (0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0)
#: minimum number of Magnus steps per basis function for smooth bases
DEFAULT_STEPS_PER_BASIS = 4
#: largest ``h * omega`` allowed by the default step count (about 1e-8 self-convergence)
MAGNUS_PHASE_PER_STEP = 0.05


def default_magnus_steps(system: ControlSystem, basis: PulseBasis) -> int:
    """Step count resolving both the drift spectrum and the basis bandwidth."""
    if isinstance(basis, PiecewiseConstantBasis):
        return basis.K
    ev = np.linalg.eigvalsh(system.drift)
    omega = max(ev[-1] - ev[0], basis.bandwidth)
    return max(DEFAULT_STEPS_PER_BASIS * basis.K, int(np.ceil(basis.T * omega / MAGNUS_PHASE_PER_STEP)))


@dataclass
class PropagationResult:
    """Propagators on the grid ``times``.

    ``steps[s]`` maps ``U(times[s])`` to ``U(times[s+1])`` and
    ``cumulative[s] = U(times[s])``.  ``pulse_nodes[s]`` holds the control
    values at the left end, middle and right end of step ``s`` (limits from
    inside the step).  For piecewise constant propagation ``energies`` and
    ``vectors`` hold the eigen-decomposition of each step Hamiltonian.
    """

    system: ControlSystem
    times: np.ndarray
    steps: np.ndarray
    cumulative: np.ndarray
    pulse_nodes: np.ndarray
    energies: Optional[np.ndarray] = None
    vectors: Optional[np.ndarray] = None

    @property
    def n_steps(self) -> int:
        return self.steps.shape[0]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def final(self) -> np.ndarray:
        return self.cumulative[-1]

    @cached_property
    def midpoints(self) -> np.ndarray:
        """``U`` at the middle of each step by cubic Hermite interpolation."""
        h_left = self.system.hamiltonian(self.pulse_nodes[:, 0])
        h_right = self.system.hamiltonian(self.pulse_nodes[:, 2])
        return midpoint_interpolate(self.cumulative[:-1], h_left,
                                    self.cumulative[1:], h_right, self.dt)


def _exp_antihermitian_batch(hermitian, scale):
    """``expm(-1j * scale * H)`` for a stack of Hermitian ``H`` via ``eigh``."""
    energies, vectors = np.linalg.eigh(hermitian)
    phases = np.exp(-1j * scale * energies)
    steps = (vectors * phases[..., None, :]) @ np.swapaxes(vectors, -1, -2).conj()
    return steps, energies, vectors


def propagate_pwc(system: ControlSystem, basis: PulseBasis, a) -> PropagationResult:
    """Exact stepping for piecewise constant controls, one step per interval."""
    if not isinstance(basis, PiecewiseConstantBasis):
        raise InvalidInputError("propagate_pwc needs a piecewise constant basis")
    coeffs = coefficient_matrix(basis, a)
    if coeffs.shape[0] != system.n_controls:
        raise InvalidInputError("parameter vector does not match the number of controls")
    h = basis.T / basis.K
    f = coeffs.T  # (K, R)
    steps, energies, vectors = _exp_antihermitian_batch(system.hamiltonian(f), h)
    times = np.linspace(0.0, basis.T, basis.K + 1)
    return PropagationResult(system, times, steps, kernels.cumulative_products(steps),
                             np.repeat(f[:, None, :], 3, axis=1), energies, vectors)


def propagate_magnus4(system: ControlSystem, basis: PulseBasis, a, S: int | None = None) -> PropagationResult:
    """Fourth order two-node Magnus integrator with ``S`` uniform steps."""
    if S is None:
        S = default_magnus_steps(system, basis)
    if S < 1:
        raise InvalidInputError("need at least one step")
    coeffs = coefficient_matrix(basis, a)
    if coeffs.shape[0] != system.n_controls:
        raise InvalidInputError("parameter vector does not match the number of controls")
    h = basis.T / S
    left = np.arange(S) * h
    nodes = np.stack([left + c * h for c in MAGNUS_NODES], axis=1)
    f = (coeffs @ basis.evaluate(nodes.ravel())).T.reshape(S, 2, -1)
    h1 = system.hamiltonian(f[:, 0])
    h2 = system.hamiltonian(f[:, 1])
    # Omega = (h/2)(A1 + A2) + (sqrt(3) h^2 / 12)[A2, A1] with A = -iH, written as -i h G
    comm = h2 @ h1 - h1 @ h2  # [H2, H1]; [A2, A1] = -[H2, H1]
    g = 0.5 * (h1 + h2) - 1j * (np.sqrt(3.0) * h / 12.0) * comm
    g = 0.5 * (g + np.swapaxes(g, -1, -2).conj())
    steps, _, _ = _exp_antihermitian_batch(g, h)
    pulse_nodes = np.einsum("rk,sjk->sjr", coeffs, basis.step_node_values(S))
    times = np.linspace(0.0, basis.T, S + 1)
    return PropagationResult(system, times, steps, kernels.cumulative_products(steps), pulse_nodes)


def propagate(system: ControlSystem, basis: PulseBasis, a, S: int | None = None) -> PropagationResult:
    """Exact stepping for piecewise constant bases, Magnus-4 otherwise."""
    if isinstance(basis, PiecewiseConstantBasis) and S in (None, basis.K):
        return propagate_pwc(system, basis, a)
    return propagate_magnus4(system, basis, a, S)


def midpoint_interpolate(u0, h0, u1, h1, h):
    """Cubic Hermite interpolant of ``U`` at the step midpoint.

    Uses the endpoint values and derivatives ``U' = -i H U``; the result is
    not re-unitarised.  Broadcasts over leading axes.
    """
    d0 = -1j * (h0 @ u0)
    d1 = -1j * (h1 @ u1)
    return 0.5 * (u0 + u1) + (h / 8.0) * (d0 - d1)
