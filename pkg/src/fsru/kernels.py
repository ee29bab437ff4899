"""Backend selection for the hot loops.

The Cython extension is used when it was built; otherwise the numpy fallback is
loaded. Set ``FSRU_PURE_PYTHON=1`` to force the fallback.
"""

import os

BACKEND = "python"

if os.environ.get("FSRU_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from fsru._ckernels import circular_conv_direct, fft_inplace

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

if BACKEND == "python":
    from fsru._kernels_py import circular_conv_direct, fft_inplace

__all__ = ["BACKEND", "fft_inplace", "circular_conv_direct"]
