"""Backend selection for the hot loops.

The Cython extension is used when it has been built; otherwise, or when the
environment variable ``SINGCLT_PURE_PYTHON`` is set to a non-empty value, the
numpy implementations are used. ``BACKEND`` names the active one.

``k4_pattern_sum`` always takes the numpy route: its inner step is a BLAS
matrix product, which outruns the compiled scalar loop at every size tried
(see ``benchmarks/bench_kernels.py``).
"""

import os

from . import _kernels_py

if os.environ.get("SINGCLT_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

bessel_k_scaled = _impl.bessel_k_scaled
toeplitz_bilinear = _impl.toeplitz_bilinear
k4_pattern_sum = _kernels_py.k4_pattern_sum

__all__ = ["BACKEND", "bessel_k_scaled", "toeplitz_bilinear", "k4_pattern_sum"]
