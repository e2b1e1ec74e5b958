"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
reference implementation is used. Set ``GSPMEC_PURE_PYTHON=1`` to force
the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("GSPMEC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

adjustment_rates = _impl.adjustment_rates
gsp_prices = _impl.gsp_prices
best_slots = _impl.best_slots
