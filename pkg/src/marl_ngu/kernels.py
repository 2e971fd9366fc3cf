"""Backend selection for the per-step hot kernels.

The compiled extension is used when it was built; otherwise the pure-Python
twins are imported. Set ``MARL_NGU_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

_compiled = None
if not os.environ.get("MARL_NGU_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

BACKEND = "cython" if _compiled is not None else "python"

physics_step = _impl.physics_step
knn_mean_distance = _impl.knn_mean_distance
max_cosine = _impl.max_cosine
flee_action = _impl.flee_action


def backends() -> dict:
    """All importable backends by name (the fallback is always present)."""
    found = {"python": _kernels_py}
    if _compiled is not None:
        found["cython"] = _compiled
    return found
