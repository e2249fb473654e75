"""Edge-kernel backend selection.

The compiled Cython extension is preferred when it imported cleanly; the
pure numpy backend is the fallback and the reference.  Setting
CITETREND_PURE_KERNELS=1 forces the fallback regardless.  Callers should
go through this module's attributes so the choice stays in one place.
"""

from __future__ import annotations

import os

from . import _pykernels

_impl = _pykernels
_BACKEND = "pure"

if os.environ.get("CITETREND_PURE_KERNELS") != "1":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        _BACKEND = "compiled"
    except ImportError:
        pass


def backend() -> str:
    """Name of the active backend: 'compiled' or 'pure'."""
    return _BACKEND


def available_backends() -> dict:
    """Importable backends by name (used by the kernel benchmark)."""
    backends = {"pure": _pykernels}
    try:
        from . import _ckernels

        backends["compiled"] = _ckernels
    except ImportError:
        pass
    return backends


scatter_add = _impl.scatter_add
scatter_max = _impl.scatter_max
segment_softmax = _impl.segment_softmax
segment_softmax_grad = _impl.segment_softmax_grad
