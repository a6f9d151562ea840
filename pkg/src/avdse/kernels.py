"""Kernel backend selection.

The compiled extension is used when it was built; otherwise (or when
``AVDSE_PURE_PYTHON=1``) the pure-Python implementations are used.
"""

from __future__ import annotations

import logging
import os

import numpy as np

from . import _kernels_py

logger = logging.getLogger(__name__)

if os.environ.get("AVDSE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        logger.debug("compiled kernels unavailable; using pure-Python fallback")
        _impl = _kernels_py
        BACKEND = "python"


def pareto_mask(x, y) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    return np.asarray(_impl.pareto_mask(x, y), dtype=bool)


def match_fifo(keys_sorted, is_start_sorted):
    return _impl.match_fifo(
        np.ascontiguousarray(keys_sorted, dtype=np.int64),
        np.ascontiguousarray(is_start_sorted, dtype=np.uint8),
    )


def count_sign_reversals(angles, deadband: float) -> int:
    return int(_impl.count_sign_reversals(np.ascontiguousarray(angles, dtype=np.float64), float(deadband)))
