"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import math
import numbers
from fractions import Fraction

import numpy as np

from .hashing import MAX_BUCKETS, as_keys


def check_stream(X) -> np.ndarray:
    """Return ``X`` as a 1-d uint64 array of universe ids.

    Accepts any 1-d array-like of non-negative integers below 2^61 - 1.
    A 2-d input with a single column (the sklearn ``(n_samples, 1)`` layout)
    is flattened.
    """
    arr = np.asarray(X) if not isinstance(X, np.ndarray) else X
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    elif arr.ndim > 1:
        raise ValueError(f"expected a 1-d stream, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if arr.size and not np.all(np.floor(arr) == arr):
            raise TypeError("stream elements must be integers")
        arr = arr.astype(np.int64)
    return as_keys(arr)


def check_epsilon(epsilon) -> float:
    if not isinstance(epsilon, numbers.Real) or isinstance(epsilon, bool):
        raise TypeError(f"epsilon must be a real number, got {epsilon!r}")
    epsilon = float(epsilon)
    if not (0.0 < epsilon <= 1.0) or math.isnan(epsilon):
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    return epsilon


def as_fraction(x: float) -> Fraction:
    # 0.1 -> 1/10 rather than the nearest binary double
    return Fraction(x).limit_denominator(10**9)


def bucket_count_for(epsilon: float) -> int:
    """``ceil(4 / eps^2) + 1``, computed exactly for decimal epsilons."""
    eps = as_fraction(check_epsilon(epsilon))
    p = math.ceil(Fraction(4) / (eps * eps)) + 1
    if p > MAX_BUCKETS:
        raise ValueError(f"epsilon={epsilon} needs {p} buckets, above the 2^32 limit")
    return p


def check_seed(random_state) -> int:
    if random_state is None:
        return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
    if isinstance(random_state, (numbers.Integral, np.integer)) and not isinstance(random_state, bool):
        seed = int(random_state)
        if not 0 <= seed < 1 << 64:
            raise ValueError("random_state must be a 64-bit non-negative integer")
        return seed
    raise TypeError(f"random_state must be None or an int, got {type(random_state).__name__}")
