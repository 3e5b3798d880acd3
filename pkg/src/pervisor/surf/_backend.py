"""Kernel backend selection: compiled extension if importable, numpy otherwise.

Set PERVISOR_NO_EXT=1 to force the numpy fallback (used by the benchmark
and the backend-equivalence test).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("PERVISOR_NO_EXT"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
response_map = _impl.response_map
