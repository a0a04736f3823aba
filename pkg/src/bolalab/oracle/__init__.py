"""Offline optimum: a quantized DP upper bound and an exact brute-force check.

The DP kernel comes in two builds with identical arithmetic: a compiled
extension (``_kernel``) and a pure-Python module (``_kernel_py``).  The
compiled one is used when it imports, unless ``BOLALAB_PURE_PYTHON`` is set.
"""

import importlib
import os

from . import _kernel_py

_compiled = None
if not os.environ.get("BOLALAB_PURE_PYTHON"):
    try:
        # import_module, not "from . import": the latter would return the
        # module attribute assigned below instead of the extension
        _compiled = importlib.import_module(__name__ + "._kernel")
    except ImportError:  # extension not built
        _compiled = None
_active = _compiled if _compiled is not None else _kernel_py
BACKEND = "compiled" if _compiled is not None else "python"

from .dp import DpResult, brute_force_optimal, offline_optimal, path_value  # noqa: E402

__all__ = ["BACKEND", "DpResult", "brute_force_optimal", "offline_optimal", "path_value"]
