"""Select the KDE kernel implementation at import time.

The compiled extension is preferred. Set ``DENSITYRIDGE_PURE_PYTHON=1`` to
force the numpy fallback (used by the benchmark and the parity tests).
"""

import os

from . import _kernels_py

BACKEND = "python"
kde_eval = _kernels_py.kde_eval

if os.environ.get("DENSITYRIDGE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        kde_eval = _compiled.kde_eval


def python_kde_eval(*args, **kwargs):
    return _kernels_py.kde_eval(*args, **kwargs)
