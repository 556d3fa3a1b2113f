"""Control systems, pulse bases and the bundled spin-chain problems."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Optional

import numpy as np

from .errors import InvalidInputError

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def site_operator(ops: dict, nqubits: int) -> np.ndarray:
    """Tensor product with ``ops[n]`` on site ``n`` (0-based), identity elsewhere."""
    factors = [PAULI[ops.get(n, "i")] for n in range(nqubits)]
    return reduce(np.kron, factors)


@dataclass(frozen=True)
class ControlSystem:
    """Bilinear system ``H(t) = drift + sum_r f_r(t) controls[r]``."""

    drift: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        drift = np.asarray(self.drift, dtype=complex)
        controls = np.asarray(self.controls, dtype=complex)
        if controls.ndim == 2:
            controls = controls[None]
        n = drift.shape[0]
        if drift.shape != (n, n) or n < 2:
            raise InvalidInputError("drift must be a square matrix with N >= 2")
        if controls.ndim != 3 or controls.shape[1:] != (n, n) or controls.shape[0] < 1:
            raise InvalidInputError("controls must be a non-empty stack of N x N matrices")
        for h in (drift, *controls):
            if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(h))):
                raise InvalidInputError("Hamiltonians must be Hermitian")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def n_controls(self) -> int:
        return self.controls.shape[0]

    def hamiltonian(self, f) -> np.ndarray:
        """Hamiltonian for control values ``f`` of shape ``(..., R)``."""
        f = np.asarray(f, dtype=float)
        return self.drift + np.tensordot(f, self.controls, axes=([-1], [0]))


def hermite_functions(kmax: int, x) -> np.ndarray:
    """Orthonormal Hermite functions ``h_0 .. h_{kmax-1}`` at ``x``, shape ``(kmax, len(x))``.

    Uses the normalised three-term recurrence with the Gaussian factor applied
    at the end, rescaling on the fly so that large ``|x|`` neither overflows
    nor underflows prematurely.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((kmax, x.size))
    log_scale = -0.5 * x * x
    prev = np.zeros_like(x)
    cur = np.full_like(x, np.pi ** -0.25)
    out[0] = cur * np.exp(log_scale)
    for j in range(1, kmax):
        nxt = x * np.sqrt(2.0 / j) * cur - np.sqrt((j - 1) / j) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > 1e150
        if np.any(big):
            cur[big] *= 1e-150
            prev[big] *= 1e-150
            log_scale[big] += 150 * np.log(10.0)
        out[j] = cur * np.exp(log_scale)
    return out


def gram_nodes(K: int) -> int:
    """Gauss-Legendre nodes needed to integrate products of ``K`` Hermite functions on ``[0, T]``."""
    return max(8 * K, 128)


class PulseBasis:
    """A family of ``K`` real functions on ``[0, T]`` shared by every control."""

    kind: str = ""

    def __init__(self, K: int, T: float):
        if K < 1 or not T > 0:
            raise InvalidInputError("need K >= 1 and T > 0")
        self.K = int(K)
        self.T = float(T)

    def evaluate(self, t) -> np.ndarray:
        """Values ``b_k(t)`` as an array of shape ``(K, len(t))``."""
        raise NotImplementedError

    def step_node_values(self, S: int) -> np.ndarray:
        """Basis values at (left, mid, right) of each of ``S`` uniform steps.

        Values are limits taken from inside each step.  Shape ``(S, 3, K)``.
        """
        h = self.T / S
        left = np.arange(S) * h
        nodes = np.stack([left, left + 0.5 * h, left + h], axis=1)
        return self.evaluate(nodes.ravel()).T.reshape(S, 3, self.K)

    @cached_property
    def gram(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def bandwidth(self) -> float:
        """Angular frequency above which the basis carries negligible power."""
        return np.pi * self.K / self.T

    def __repr__(self):
        return f"{type(self).__name__}(K={self.K}, T={self.T})"


class PiecewiseConstantBasis(PulseBasis):
    """Indicators of ``((k-1)T/K, kT/K]``."""

    kind = "pwc"

    def interval_index(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.ceil(t * self.K / self.T - 1e-12).astype(int)
        return idx  # 1-based; 0 means t == 0

    def evaluate(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = self.interval_index(t)
        return (np.arange(1, self.K + 1)[:, None] == idx[None, :]).astype(float)

    def step_node_values(self, S: int) -> np.ndarray:
        h = self.T / S
        mid = (np.arange(S) + 0.5) * h
        vals = self.evaluate(mid).T
        return np.repeat(vals[:, None, :], 3, axis=1)

    @cached_property
    def gram(self) -> np.ndarray:
        return np.eye(self.K) * (self.T / self.K)


class HermiteBasis(PulseBasis):
    """Hermite functions centred on ``T/2`` and scaled to ``tail`` outside ``(0, T)``."""

    kind = "hermite"

    def __init__(self, K: int, T: float, tail: float = 1e-8, tail_samples: int = 1000):
        super().__init__(K, T)
        self.tail = tail
        self.tail_samples = tail_samples
        self.edge = self._calibrate_edge()
        self.scale = self.T / (2.0 * self.edge)

    def _tail_max(self, edge: float) -> float:
        # |h_j| is even, so one side determines both
        xs = np.linspace(edge, 2.0 * edge, self.tail_samples)
        return float(np.max(np.abs(hermite_functions(self.K, xs))))

    def _calibrate_edge(self) -> float:
        lo = np.sqrt(2.0 * self.K + 1.0)
        hi = lo + 10.0
        while self._tail_max(hi) > self.tail:
            hi += 10.0
        target = np.log(self.tail)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if np.log(self._tail_max(mid)) > target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12 * hi:
                break
        return 0.5 * (lo + hi)

    def evaluate(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return hermite_functions(self.K, (t - 0.5 * self.T) / self.scale)

    @property
    def bandwidth(self) -> float:
        # h_j is its own Fourier transform; its support ends near sqrt(2j + 1)
        return np.sqrt(2.0 * self.K + 1.0) / self.scale

    @cached_property
    def gram(self) -> np.ndarray:
        n = gram_nodes(self.K)
        x, w = np.polynomial.legendre.leggauss(n)
        t = 0.5 * self.T * (x + 1.0)
        b = self.evaluate(t)
        g = (b * (0.5 * self.T * w)) @ b.T
        return 0.5 * (g + g.T)


def make_basis(kind: str, K: int, T: float) -> PulseBasis:
    if kind in ("pwc", "piecewise", "piecewise-constant"):
        return PiecewiseConstantBasis(K, T)
    if kind == "hermite":
        return HermiteBasis(K, T)
    raise InvalidInputError(f"unknown basis kind {kind!r}")


def basis_eval(basis: PulseBasis, k: int, t: float) -> float:
    """Value of the ``k``-th basis function (1-based) at time ``t``."""
    if not 1 <= k <= basis.K:
        raise InvalidInputError(f"basis index {k} outside 1..{basis.K}")
    return float(basis.evaluate([t])[k - 1, 0])


def coefficient_matrix(basis: PulseBasis, a) -> np.ndarray:
    """Reshape a control-major parameter vector to ``(R, K)``."""
    a = np.asarray(a, dtype=float)
    if a.size % basis.K:
        raise InvalidInputError(f"parameter vector length {a.size} is not a multiple of K={basis.K}")
    return a.reshape(-1, basis.K)


def synthesize(basis: PulseBasis, a, t) -> np.ndarray:
    """Pulse values ``f_r(t)``; shape ``(R,)`` for scalar ``t``, else ``(R, len(t))``."""
    coeffs = coefficient_matrix(basis, a)
    scalar = np.ndim(t) == 0
    f = coeffs @ basis.evaluate(t)
    return f[:, 0] if scalar else f


def pulse_norm(basis: PulseBasis, a) -> float:
    """Integrated power norm ``sqrt(sum_r int_0^T f_r(t)^2 dt)``."""
    coeffs = coefficient_matrix(basis, a)
    if isinstance(basis, PiecewiseConstantBasis):
        return float(np.sqrt(basis.T / basis.K) * np.linalg.norm(coeffs))
    return float(np.sqrt(max(np.einsum("rk,kl,rl->", coeffs, basis.gram, coeffs), 0.0)))


def random_pulse(basis: PulseBasis, R: int, norm: float, seed) -> np.ndarray:
    """Random direction, uniform in the Gram geometry, scaled to pulse norm ``norm``."""
    if norm < 0:
        raise InvalidInputError("norm must be non-negative")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(R * basis.K)
    if norm == 0:
        return np.zeros_like(g)
    return norm * g / pulse_norm(basis, g)


def project_function(basis: PulseBasis, fn, R: int, nodes: int | None = None) -> np.ndarray:
    """Least-squares basis coefficients of ``fn(t) -> (R, len(t))``."""
    if isinstance(basis, PiecewiseConstantBasis):
        x, w = np.polynomial.legendre.leggauss(8)
        h = basis.T / basis.K
        left = np.arange(basis.K) * h
        t = (left[:, None] + 0.5 * h * (x[None, :] + 1.0)).ravel()
        vals = np.asarray(fn(t)).reshape(R, basis.K, 8)
        return (0.5 * vals @ w).ravel()
    n = nodes or gram_nodes(basis.K)
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * basis.T * (x + 1.0)
    rhs = np.asarray(fn(t)).reshape(R, n) @ (basis.evaluate(t) * (0.5 * basis.T * w)).T
    return np.linalg.solve(basis.gram, rhs.T).T.ravel()


def smooth_random_pulse(basis: PulseBasis, R: int, norm: float, seed, modes: int = 4) -> np.ndarray:
    """Random low-frequency pulse (a few sine modes) expressed in ``basis``."""
    rng = np.random.default_rng(seed)
    amp = rng.standard_normal((R, modes)) / np.arange(1, modes + 1)
    phase = rng.uniform(0, 2 * np.pi, (R, modes))
    freq = np.arange(1, modes + 1) * np.pi / basis.T

    def fn(t):
        t = np.asarray(t)
        return np.einsum("rm,rmt->rt", amp, np.sin(freq[None, :, None] * t + phase[..., None]))

    a = project_function(basis, fn, R)
    nrm = pulse_norm(basis, a)
    return a * (norm / nrm) if nrm > 0 else a


@dataclass
class ProblemSpec:
    """A gate synthesis problem: system, basis, target and stopping tolerance."""

    system: ControlSystem
    basis: PulseBasis
    target: Optional[object] = None  # objective.TargetSpec
    epsilon: float = 1e-4
    fluence_bound: Optional[float] = None
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInputError("epsilon must be positive")
        if self.fluence_bound is not None and not self.fluence_bound > 0:
            raise InvalidInputError("fluence bound must be positive")

    @property
    def n_params(self) -> int:
        return self.system.n_controls * self.basis.K


def qft_matrix(n: int) -> np.ndarray:
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


def ising_chain(qubits: int) -> ControlSystem:
    """Open Ising chain in a linear field gradient, driven by global x and y fields."""
    q = qubits
    drift = sum(
        (site_operator({n: "z", n + 1: "z"}, q) for n in range(q - 1)),
        np.zeros((2 ** q, 2 ** q), dtype=complex),
    )
    for n in range(q):
        drift = drift - (n + 3) * site_operator({n: "z"}, q)  # omega_n = n + 2, 1-based
    hx = sum(site_operator({n: "x"}, q) for n in range(q))
    hy = sum(site_operator({n: "y"}, q) for n in range(q))
    return ControlSystem(drift, np.stack([hx, hy]))


def heisenberg_chain(qubits: int, rabi: float = 10.0) -> ControlSystem:
    """Heisenberg chain with a transverse field; single detuning control on spin 1."""
    q = qubits
    drift = np.zeros((2 ** q, 2 ** q), dtype=complex)
    for n in range(q - 1):
        for p in "xyz":
            drift = drift + site_operator({n: p, n + 1: p}, q)
    for n in range(q):
        drift = drift + rabi * site_operator({n: "x"}, q)
    return ControlSystem(drift, site_operator({0: "z"}, q)[None])


def build_ising_qft_problem(qubits: int = 5, K: int = 1000, T: float = 125.0,
                            basis: str = "pwc", epsilon: float = 1e-4,
                            fluence_bound: Optional[float] = None) -> ProblemSpec:
    """Quantum Fourier transform on the Ising chain (defaults: 5 qubits, K=1000, T=125)."""
    from .objective import TargetSpec

    system = ising_chain(qubits)
    return ProblemSpec(system, make_basis(basis, K, T), TargetSpec(qft_matrix(system.dim)),
                       epsilon, fluence_bound, name="ising-qft",
                       meta={"qubits": qubits})


def build_heisenberg_tgate_problem(target=None, qubits: int = 5, K: int = 1500,
                                   T: float = 90.0, basis: str = "pwc",
                                   epsilon: float = 1e-4,
                                   fluence_bound: Optional[float] = None) -> ProblemSpec:
    """Heisenberg chain with one local control (defaults: 5 qubits, K=1500, T=90).

    The encoded gate is supplied by the caller as a unitary matrix or a
    :class:`~gatesynth.objective.TargetSpec`; without it the problem has no target.
    """
    from .objective import TargetSpec

    system = heisenberg_chain(qubits)
    if target is not None and not isinstance(target, TargetSpec):
        target = TargetSpec(target)
    return ProblemSpec(system, make_basis(basis, K, T), target, epsilon, fluence_bound,
                       name="heisenberg-t", meta={"qubits": qubits})


PRESETS = {
    "ising-qft": build_ising_qft_problem,
    "heisenberg-t": build_heisenberg_tgate_problem,
}
