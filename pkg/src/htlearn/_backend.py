"""Kernel backend selection.

The compiled extension is used when it imports; ``HTLEARN_PURE=1`` forces the
numpy fallback.
"""

import math
import os

import numpy as np

from . import _kernels_py

FALLBACK_TOL = 1e-10

BACKEND = "python"
kernels = _kernels_py

if os.environ.get("HTLEARN_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        kernels = _compiled
        BACKEND = "cython"


def inclusion_dp(w, n):
    """Scaled DP, redone in the log domain when the scaled pass loses mass."""
    try:
        pi, log_en = kernels.inclusion_dp(w, n)
    except ArithmeticError:
        return _kernels_py.inclusion_dp_log(w, n)
    if not (np.all(np.isfinite(pi)) and math.isfinite(log_en)) or abs(pi.sum() - n) > FALLBACK_TOL * max(1.0, n):
        return _kernels_py.inclusion_dp_log(w, n)
    return pi, log_en


def split_scores(X, y, w, min_leaf_weight):
    return kernels.split_scores(X, y, w, min_leaf_weight)


def smo_solve(K, y, C, eps=1e-6, max_iter=10_000_000):
    return kernels.smo_solve(K, y, C, eps, max_iter)
