"""Input checks shared by the estimators."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array

from .geometry import CompactSet, set_from_dict
from .kernels import Kernel, ShiftedLog, kernel_from_dict


def check_compact_set(X):
    if isinstance(X, CompactSet):
        return X
    if isinstance(X, dict):
        return set_from_dict(X)
    raise TypeError(f"expected a CompactSet or a set descriptor, got {type(X).__name__}")


def check_kernel(kernel, compact_set=None):
    if isinstance(kernel, dict):
        kernel = kernel_from_dict(kernel)
    if not isinstance(kernel, Kernel):
        raise TypeError(f"expected a Kernel or a kernel descriptor, got {type(kernel).__name__}")
    if compact_set is not None and isinstance(kernel, ShiftedLog):
        kernel = kernel.for_set(compact_set)
    return kernel


def check_points(X, ambient_dim):
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, ambient_dim) if ambient_dim > 1 else X[:, None]
    if X.shape[1] != ambient_dim:
        raise ValueError(f"X has {X.shape[1]} columns, the set lives in R^{ambient_dim}")
    return X


def check_count(n, name, minimum=1):
    if not isinstance(n, numbers.Integral) or n < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {n!r}")
    return int(n)


def check_seed(seed):
    if isinstance(seed, np.random.Generator):
        raise TypeError("pass an integer seed; generators are not reproducible across processes")
    if seed is None:
        return 0
    if not isinstance(seed, numbers.Integral):
        raise ValueError(f"random_state must be an integer, got {seed!r}")
    return int(seed)
