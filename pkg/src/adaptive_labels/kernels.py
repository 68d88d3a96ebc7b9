"""Backend selection for the numerical kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation in ``_pykernels`` is used. Set ``ADAPTIVE_LABELS_BACKEND=python``
to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("ADAPTIVE_LABELS_BACKEND", "").lower() == "python":
        raise ImportError("python backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def pairwise_distance(Z, C, eps):
    return _impl.pairwise_distance(_f64(Z), _f64(C), float(eps))


def pairwise_distance_backward(G, Z, C, D):
    return _impl.pairwise_distance_backward(_f64(G), _f64(Z), _f64(C), _f64(D))


def repel(Z, labels, tol):
    return _impl.repel(_f64(Z), _i64(labels), float(tol))


def class_sums(Z, labels, n_classes):
    return _impl.class_sums(_f64(Z), _i64(labels), int(n_classes))


def tau_b_counts(a, b):
    return _impl.tau_b_counts(_f64(a), _f64(b))


def average_linkage(D):
    return _impl.average_linkage(_f64(D))
