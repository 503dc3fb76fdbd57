"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``PROPHET_LAB_PURE=1`` to
force the NumPy fallback.
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("PROPHET_LAB_PURE"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"


def first_exceed(values, ties, thr_values, thr_ties, backend=None):
    """Per row, the first column whose tagged value strictly exceeds its threshold (-1 if none).

    ``values``/``ties`` are ``(trials, n)``; thresholds are ``(n,)`` or ``(trials, n)``.
    """
    impl = _resolve(backend)
    values = np.ascontiguousarray(values, dtype=np.float64)
    ties = np.ascontiguousarray(ties, dtype=np.float64)
    thr_values = np.broadcast_to(np.asarray(thr_values, dtype=np.float64), values.shape)
    thr_ties = np.broadcast_to(np.asarray(thr_ties, dtype=np.float64), values.shape)
    return impl.first_exceed(values, ties, thr_values, thr_ties)


def enumerate_outcomes(w, origin, is_y, ranks, start=0, stop=None, backend=None):
    """Sums over coin masks in ``[start, stop)``: ``(prophet, gambler[orders], adversary)``.

    ``w`` holds the 2n merged values in descending order, ``origin`` their 0-based
    origin, ``is_y`` whether each is the larger of its pair, and ``ranks[p, i]``
    the arrival rank of origin ``i`` under order ``p``.
    """
    impl = _resolve(backend)
    w = np.ascontiguousarray(w, dtype=np.float64)
    origin = np.ascontiguousarray(origin, dtype=np.int64)
    is_y = np.ascontiguousarray(is_y, dtype=np.uint8)
    ranks = np.ascontiguousarray(np.atleast_2d(ranks), dtype=np.int64)
    if stop is None:
        stop = 1 << (len(w) // 2)
    return impl.enumerate_outcomes(w, origin, is_y, ranks, int(start), int(stop))


def _resolve(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {backend!r}")
