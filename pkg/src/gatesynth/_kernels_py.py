"""Pure numpy implementations of the hot loops (fallback backend)."""
import numpy as np

SERIES_THRESHOLD = 1e-8


def gamma_batch(lam):
    """``out[k, r, s] = gamma(lam[k, s] - lam[k, r])`` for a stack of spectra."""
    lam = np.asarray(lam, dtype=complex)
    z = lam[:, None, :] - lam[:, :, None]
    small = np.abs(z) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, z)
    x, y = safe.real, safe.imag
    em1 = (np.expm1(x) * np.cos(y) - 2.0 * np.sin(0.5 * y) ** 2) + 1j * (np.exp(x) * np.sin(y))
    out = em1 / safe
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs * zs / 6.0
    return out


def cumulative_products(steps):
    """``out[0] = I``, ``out[s] = steps[s-1] @ out[s-1]``."""
    steps = np.asarray(steps, dtype=complex)
    s, n, _ = steps.shape
    out = np.empty((s + 1, n, n), dtype=complex)
    out[0] = np.eye(n)
    for i in range(s):
        np.matmul(steps[i], out[i], out=out[i + 1])
    return out


def sandwich(x, m):
    """Batched ``x[k]^H @ m[k] @ x[k]``."""
    x = np.asarray(x, dtype=complex)
    return np.swapaxes(x, -1, -2).conj() @ m @ x


def pwc_generators(q, energies, controls, x, h):
    """Per-interval derivative generators in a common output frame.

    For each interval ``k`` with step Hamiltonian eigenframe ``(energies[k],
    q[k])`` and each control ``r`` this returns

        x[k]^H (Gamma_k * (q[k]^H (-i h H_r) q[k])) x[k]

    where ``Gamma_k`` is built from the step exponent eigenvalues
    ``-i h energies[k]``.  Shape ``(R, K, N, N)``.
    """
    q = np.asarray(q, dtype=complex)
    qh = np.swapaxes(q, -1, -2).conj()
    g = gamma_batch(-1j * h * np.asarray(energies, dtype=float))
    controls = np.asarray(controls, dtype=complex)
    out = np.empty((controls.shape[0],) + q.shape, dtype=complex)
    for r, hr in enumerate(controls):
        inner = g * (qh @ ((-1j * h) * hr) @ q)
        out[r] = sandwich(x, inner)
    return out
