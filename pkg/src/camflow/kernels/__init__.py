"""Geometry kernel backend selection.

The compiled extension is preferred when importable; otherwise the
pure-NumPy reference backend is used. Both produce bit-identical results.
Set CAMFLOW_KERNELS=reference|compiled to force a backend.
"""

import os

from . import reference

_requested = os.environ.get("CAMFLOW_KERNELS", "auto").strip().lower()

if _requested in ("auto", "", "compiled"):
    try:
        from . import _fastpath as _impl
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = reference
        BACKEND = "reference"
elif _requested == "reference":
    _impl = reference
    BACKEND = "reference"
else:
    raise ValueError(f"CAMFLOW_KERNELS must be 'compiled' or 'reference', got {_requested!r}")

raycast_frame = _impl.raycast_frame
splat_points = _impl.splat_points


def available_backends():
    """Importable backend modules by name (for tests and benchmarks)."""
    out = {"reference": reference}
    try:
        from . import _fastpath
        out["compiled"] = _fastpath
    except ImportError:
        pass
    return out
