"""Backend selection for the graph kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``BICECM_PURE_PYTHON`` is set to a non-empty value, the
pure-Python module is used. ``BACKEND`` names the active choice.
"""
import os

from . import _pykernels

if os.environ.get("BICECM_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

max_flow_batch = _impl.max_flow_batch
connected_batch = _impl.connected_batch

__all__ = ["BACKEND", "max_flow_batch", "connected_batch"]
