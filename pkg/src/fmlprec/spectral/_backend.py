"""Pick the FFT kernel module at import time.

Each backend module provides ``fft_pow2_rows`` and ``bluestein_rows``.

Set ``FMLPREC_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _fft_py

KERNELS = {"python": _fft_py}

try:
    from . import _fft_ext
except ImportError:  # extension not built
    _fft_ext = None
else:
    KERNELS["cython"] = _fft_ext

if os.environ.get("FMLPREC_PURE_PYTHON") or "cython" not in KERNELS:
    BACKEND = "python"
else:
    BACKEND = "cython"

kernels = KERNELS[BACKEND]
