"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise the numpy
fallback takes over.  Set WSNAS_BACKEND=numpy to force the fallback (useful
for benchmarking and for debugging kernel discrepancies).
"""

import os

from . import _fallback

_requested = os.environ.get("WSNAS_BACKEND", "auto").lower()
_impl = _fallback
if _requested in ("auto", "cython", "native"):
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested != "auto":
            raise
elif _requested != "numpy":
    raise ValueError(f"WSNAS_BACKEND must be auto|numpy|cython, got {_requested!r}")

BACKEND = _impl.BACKEND

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
dwconv2d_forward = _impl.dwconv2d_forward
dwconv2d_backward = _impl.dwconv2d_backward
maxpool3x3_forward = _impl.maxpool3x3_forward
maxpool3x3_backward = _impl.maxpool3x3_backward

bn_stats = _impl.bn_stats
bn_apply = _impl.bn_apply
bn_backward = _impl.bn_backward
