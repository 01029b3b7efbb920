"""Kernel backend selection: compiled extension with a pure-numpy fallback.

Set PERMKISS_BACKEND=python to force the fallback lane, or
PERMKISS_BACKEND=cython to fail loudly if the extension is missing.
"""

import os

_forced = os.environ.get("PERMKISS_BACKEND", "").strip().lower()

if _forced in ("python", "numpy", "py"):
    from . import _kernels_py as _impl

    BACKEND = "python"
elif _forced in ("", "cython", "compiled", "c"):
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _forced:
            raise
        from . import _kernels_py as _impl

        BACKEND = "python"
else:
    raise ValueError(f"unknown PERMKISS_BACKEND value: {_forced!r}")

lap_solve = _impl.lap_solve
segment_softmax = _impl.segment_softmax
segment_softmax_grad = _impl.segment_softmax_grad
entry_dots = _impl.entry_dots
scatter_rows_add = _impl.scatter_rows_add
