"""Backend selection for the routing kernel.

The compiled extension is used when it imports; ``CHARGEGRID_PURE=1``
forces the pure-Python implementation (handy for debugging and for
benchmarking the two against each other).
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
route_box = _kernels_py.route_box

if os.environ.get("CHARGEGRID_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        route_box = _compiled.route_box
        BACKEND = "cython"

trace_path = _kernels_py.trace_path
