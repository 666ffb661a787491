"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and importable; setting
``BLAB_PURE_PYTHON=1`` forces the fallback.  ``BACKEND`` names the active one.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("BLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

holder_shell_max = _impl.holder_shell_max
riccati_integrate = _impl.riccati_integrate


def backends() -> dict:
    """All importable backends, keyed by name."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
