"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The compiled module is used when it imports; set ``EXCERPTLAB_PURE_PYTHON=1``
to force the fallback.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("EXCERPTLAB_PURE_PYTHON"):
    _impl = _fallback
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _fallback

BACKEND = "python" if _impl is _fallback else "cython"

lzw_encode = _impl.lzw_encode
lzw_decode = _impl.lzw_decode
rle_binary_encode = _impl.rle_binary_encode
rle_binary_decode = _impl.rle_binary_decode
simplex_lsq = _impl.simplex_lsq

__all__ = [
    "BACKEND",
    "lzw_encode",
    "lzw_decode",
    "rle_binary_encode",
    "rle_binary_decode",
    "simplex_lsq",
]
