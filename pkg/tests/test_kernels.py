import os
import subprocess
import sys

import numpy as np
import pytest

from gatesynth import _kernels_py
from gatesynth.algebra import gamma
from gatesynth.model import build_ising_qft_problem, random_pulse
from gatesynth.objective import residual
from gatesynth.propagation import propagate

compiled = pytest.importorskip("gatesynth._kernels", reason="compiled extension not built")


def kernel_inputs(qubits=2, K=12, seed=0):
    p = build_ising_qft_problem(qubits=qubits, K=K, T=6.0)
    a = random_pulse(p.basis, 2, 2.5, seed)
    prop = propagate(p.system, p.basis, a)
    lam = residual(p.target, prop).frame.vectors
    x = np.swapaxes(prop.vectors, -1, -2).conj() @ prop.cumulative[:-1] @ lam
    ctl = p.system.controls
    return {
        "gamma_batch": (-1j * prop.energies * prop.dt,),
        "cumulative_products": (prop.steps,),
        "sandwich": (prop.cumulative, np.broadcast_to(-1j * ctl[0], prop.cumulative.shape)),
        "pwc_generators": (prop.vectors, prop.energies, ctl, x, prop.dt),
    }


@pytest.mark.parametrize("qubits", [1, 2, 3])
@pytest.mark.parametrize("name", ["gamma_batch", "cumulative_products", "sandwich", "pwc_generators"])
def test_backends_agree(name, qubits):
    args = kernel_inputs(qubits)[name]
    py = np.asarray(getattr(_kernels_py, name)(*args))
    cy = np.asarray(getattr(compiled, name)(*args))
    assert py.shape == cy.shape
    assert np.max(np.abs(py - cy)) < 1e-13


def test_gamma_batch_matches_scalar_gamma():
    rng = np.random.default_rng(0)
    lam = 1j * rng.uniform(-3, 3, (5, 4))
    lam[0, 1] = lam[0, 0] + 1e-10j  # series branch
    out = _kernels_py.gamma_batch(lam)
    ref = gamma(lam[:, None, :] - lam[:, :, None])
    assert np.allclose(out, ref, atol=1e-15)
    assert np.allclose(compiled.gamma_batch(lam), ref, atol=1e-15)


def test_cumulative_products_accept_non_contiguous_input():
    steps = kernel_inputs()["cumulative_products"][0]
    view = np.swapaxes(np.swapaxes(steps, 1, 2).copy(), 1, 2)
    assert not view.flags.c_contiguous
    assert np.allclose(compiled.cumulative_products(view), _kernels_py.cumulative_products(steps), atol=1e-14)


def test_environment_forces_fallback():
    code = "from gatesynth import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, GATESYNTH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env["GATESYNTH_PURE_PYTHON"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"


def test_full_evaluation_independent_of_backend():
    code = ("import numpy as np, sys; from gatesynth.model import build_ising_qft_problem, random_pulse;"
            "from gatesynth.objective import evaluate;"
            "p = build_ising_qft_problem(qubits=2, K=16, T=8.0); a = random_pulse(p.basis, 2, 2.0, 3);"
            "np.save(sys.argv[1], evaluate(p, a).jacobian.J)")
    mats = []
    for flag in ("1", "0"):
        path = os.path.join(os.environ.get("TMPDIR", "/tmp"), f"gatesynth_J_{flag}_{os.getpid()}.npy")
        env = dict(os.environ, GATESYNTH_PURE_PYTHON=flag)
        subprocess.run([sys.executable, "-c", code, path], env=env, check=True)
        mats.append(np.load(path))
        os.remove(path)
    assert np.max(np.abs(mats[0] - mats[1])) < 1e-12
