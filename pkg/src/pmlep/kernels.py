"""Backend selection for the RK4 hot loops.

The compiled extension ``_ckernels`` is used when it imports; otherwise, or
when ``PMLEP_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
numpy implementation in ``_pykernels`` is used. Both produce the same
numbers up to floating-point rounding.
"""

import os

from . import _pykernels


def _load():
    if os.environ.get("PMLEP_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


_impl, BACKEND = _load()

rk4_constant = _impl.rk4_constant
rk4_modulated = _impl.rk4_modulated


def available_backends():
    """Mapping of backend name to kernel module for every importable backend."""
    backends = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        backends["cython"] = _ckernels
    return backends
