"""Hot sliding-window kernels.

The compiled Cython build is used when importable. Set
``HARVEST_HAR_KERNELS=python`` to force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("HARVEST_HAR_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

rolling_window_stats = _impl.rolling_window_stats
rolling_mean = _impl.rolling_mean

__all__ = ["BACKEND", "rolling_window_stats", "rolling_mean"]
