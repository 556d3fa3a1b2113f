"""Compare the compiled kernels against the numpy fallback.

Times each kernel on both backends with identical inputs and checks that the
outputs agree, then times a full residual + Jacobian evaluation with each
backend (in a subprocess, since the backend is chosen at import).

    python benchmarks/bench_kernels.py [--qubits 3] [--K 200] [--repeat 5]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from gatesynth import _kernels_py

try:
    from gatesynth import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def inputs(qubits, K, seed=0):
    from gatesynth.model import build_ising_qft_problem, random_pulse
    from gatesynth.objective import residual
    from gatesynth.propagation import propagate

    problem = build_ising_qft_problem(qubits=qubits, K=K, T=8.0 * qubits)
    a = random_pulse(problem.basis, problem.system.n_controls, 2.0, seed)
    prop = propagate(problem.system, problem.basis, a)
    res = residual(problem.target, prop)
    lam = res.frame.vectors
    x = np.swapaxes(prop.vectors, -1, -2).conj() @ prop.cumulative[:-1] @ lam
    ctl = problem.system.controls
    return {
        "gamma_batch": (-1j * prop.energies * prop.dt,),
        "cumulative_products": (prop.steps,),
        "sandwich": (prop.cumulative, np.broadcast_to(-1j * ctl[0], prop.cumulative.shape)),
        "pwc_generators": (prop.vectors, prop.energies, ctl, x, prop.dt),
    }


def bench_kernels(qubits, K, repeat):
    if _kernels_c is None:
        print("compiled extension not built; only the numpy backend is available")
    data = inputs(qubits, K)
    print(f"kernels, N={2 ** qubits}, K={K} (best of {repeat}, ms)")
    print(f"{'kernel':22s}{'numpy':>10s}{'cython':>10s}{'speedup':>9s}{'max diff':>11s}")
    for name, args in data.items():
        py = getattr(_kernels_py, name)
        tp = min(timeit.repeat(lambda: py(*args), number=1, repeat=repeat)) * 1e3
        if _kernels_c is None:
            print(f"{name:22s}{tp:10.3f}")
            continue
        cy = getattr(_kernels_c, name)
        tc = min(timeit.repeat(lambda: cy(*args), number=1, repeat=repeat)) * 1e3
        diff = np.max(np.abs(np.asarray(py(*args)) - np.asarray(cy(*args))))
        print(f"{name:22s}{tp:10.3f}{tc:10.3f}{tp / tc:9.2f}{diff:11.2e}")


END_TO_END = """
import timeit
from gatesynth import kernels
from gatesynth.model import build_ising_qft_problem, random_pulse
from gatesynth.objective import evaluate
p = build_ising_qft_problem(qubits={q}, K={K}, T=8.0 * {q})
a = random_pulse(p.basis, p.system.n_controls, 2.0, 0)
t = min(timeit.repeat(lambda: evaluate(p, a), number=1, repeat={r}))
print(kernels.BACKEND, t)
"""


def bench_end_to_end(qubits, K, repeat):
    print(f"\nresidual + Jacobian evaluation, N={2 ** qubits}, K={K} (best of {repeat}, ms)")
    for pure in ("1", "0"):
        env = dict(os.environ, GATESYNTH_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", END_TO_END.format(q=qubits, K=K, r=repeat)],
                             env=env, capture_output=True, text=True, check=True).stdout.split()
        print(f"{out[0]:10s}{float(out[1]) * 1e3:10.3f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, default=3)
    ap.add_argument("--K", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    bench_kernels(args.qubits, args.K, args.repeat)
    bench_end_to_end(args.qubits, args.K, args.repeat)


if __name__ == "__main__":
    main()
