"""Backend selection for the hot loops.

The compiled extension ``gatesynth._kernels`` is used when it was built;
otherwise the numpy implementation in ``gatesynth._kernels_py`` is used.
Setting ``GATESYNTH_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("GATESYNTH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

gamma_batch = _impl.gamma_batch
cumulative_products = _impl.cumulative_products
sandwich = _impl.sandwich
pwc_generators = _impl.pwc_generators
