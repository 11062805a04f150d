"""Kernel backend selection.

The compiled extension (``gmmflow._kernels``) is preferred when it imported
cleanly; otherwise the pure-numpy fallback is used.  Set
``GMMFLOW_BACKEND=python`` to force the fallback, ``GMMFLOW_BACKEND=cython``
to require the extension (raises if it is unavailable).
"""

import os

from . import _kernels_py

_requested = os.environ.get("GMMFLOW_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "GMMFLOW_BACKEND=cython but the compiled extension is not "
                "available; build it with `pip install -e .`"
            )
        _impl = _kernels_py
        BACKEND = "python"

mixture_eval = _impl.mixture_eval
mixture_logpdf_batch = _impl.mixture_logpdf_batch
mixture_score_vjp = _impl.mixture_score_vjp


def backend_name() -> str:
    """Name of the active kernel backend ('cython' or 'python')."""
    return BACKEND
