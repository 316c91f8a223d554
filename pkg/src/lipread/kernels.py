"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise, or when
``LIPREAD_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
numpy fallback is used. ``BACKEND`` names the active one.
"""

import os

from . import _pykernels

_force_python = os.environ.get("LIPREAD_PURE_PYTHON", "") not in ("", "0")

_impl = _pykernels
if not _force_python:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.NAME

forward_loglik = _impl.forward_loglik
estep = _impl.estep
nonmax_suppress = _impl.nonmax_suppress
hysteresis = _impl.hysteresis
kmeans_assign = _impl.kmeans_assign


def available_backends():
    """Map backend name -> module for every backend that can be imported."""
    out = {"python": _pykernels}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
