"""Selects the solver kernel backend at import time.

The compiled extension is preferred when present; otherwise the numpy
fallback is used. ``SUBGOAL_ALIGN_BACKEND`` forces the choice:

* ``auto`` (default) — compiled if importable, else python
* ``compiled``        — require the extension, fail loudly if missing
* ``python``          — always use the numpy fallback
"""

import os

_ENV_VAR = "SUBGOAL_ALIGN_BACKEND"


def load_backend(name):
    """Import a kernel backend module by name ('compiled' or 'python')."""
    if name == "compiled":
        from . import _kernels

        return _kernels
    if name == "python":
        from . import _kernels_py

        return _kernels_py
    raise ValueError(f"unknown backend {name!r}")


def _select():
    requested = os.environ.get(_ENV_VAR, "auto").strip().lower() or "auto"
    if requested == "auto":
        try:
            return load_backend("compiled")
        except ImportError:
            return load_backend("python")
    return load_backend(requested)


_impl = _select()

backend_name = _impl.BACKEND_NAME
value_sweeps = _impl.value_sweeps
greedy_rows = _impl.greedy_rows
eval_sweeps = _impl.eval_sweeps
