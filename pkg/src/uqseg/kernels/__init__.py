"""Hot pixel kernels: affine bilinear warp, box blur, border tracing.

A compiled extension (``_native``, Cython) is preferred when it was built;
otherwise the numpy fallback is used.  Both produce bit-identical output.
Set ``UQSEG_PURE_PYTHON=1`` to force the fallback, e.g. for benchmarking.
"""

import os

from . import _fallback

if os.environ.get("UQSEG_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _native as _impl
        BACKEND = "native"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

warp_affine_bilinear = _impl.warp_affine_bilinear
box_blur3 = _impl.box_blur3
trace_outer_borders = _impl.trace_outer_borders


def available_backends() -> dict:
    """Name -> module for every importable backend (used by tests/benchmarks)."""
    backends = {"python": _fallback}
    try:
        from . import _native
        backends["native"] = _native
    except ImportError:
        pass
    return backends
