"""Exact ground truth: histograms, frequency moments and the exhaustive oracle.

Everything here uses arbitrary-precision integers (and ``Fraction`` for the
exhaustive moments) so results carry no rounding at all.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .hashing import MAX_ENUMERATION

MAX_MOMENT_ORDER = 8


@dataclass(frozen=True, eq=False)
class Histogram:
    """Distinct element ids with their frequencies (all >= 1)."""

    keys: np.ndarray
    freqs: np.ndarray
    n: int

    @property
    def counts(self) -> dict[int, int]:
        return dict(zip(self.keys.tolist(), self.freqs.tolist()))

    def frequencies(self) -> list[int]:
        return self.freqs.tolist()

    def __len__(self) -> int:
        return int(self.keys.size)


def histogram(stream) -> Histogram:
    arr = np.asarray(stream).reshape(-1)
    if arr.size == 0:
        return Histogram(np.zeros(0, dtype=np.uint64), np.zeros(0, dtype=np.int64), 0)
    keys, freqs = np.unique(arr, return_counts=True)
    return Histogram(keys, freqs.astype(np.int64), int(arr.size))


def _int64_safe(freqs: np.ndarray, p: int) -> bool:
    if freqs.size == 0:
        return True
    return int(freqs.max()) ** p * freqs.size < 2**63


def exact_moment(h: Histogram | Mapping[int, int] | Sequence[int], p: int) -> int:
    """``F_p = sum_x f_x^p``; F_0 counts distinct elements.

    ``h`` may be a :class:`Histogram`, a mapping of frequencies or a plain
    sequence of frequencies. Falls back to Python ints whenever int64 could
    overflow.
    """
    if not 0 <= p <= MAX_MOMENT_ORDER:
        raise ValueError(f"moment order {p} outside [0, {MAX_MOMENT_ORDER}]")
    if isinstance(h, Histogram):
        if _int64_safe(h.freqs, p):
            return int(np.sum(h.freqs**p)) if p else len(h)
        freqs = h.frequencies()
    elif isinstance(h, Mapping):
        freqs = list(h.values())
    else:
        freqs = [int(f) for f in h]
    if p == 0:
        return sum(1 for f in freqs if f > 0)
    return sum(int(f) ** p for f in freqs)


def exhaustive_sketch_moments(freqs: Sequence[int], bucket_count: int) -> tuple[Fraction, Fraction]:
    """Exact mean and variance of ``sum_i A[i]^2`` under truly random hashing.

    Every bucket map ``[u] -> [P]`` and sign map ``[u] -> {-1,+1}`` is visited
    once with equal weight.
    """
    freqs = [int(f) for f in freqs]
    u = len(freqs)
    total = bucket_count**u * 2**u
    if bucket_count < 1:
        raise ValueError("bucket_count must be >= 1")
    if total > MAX_ENUMERATION:
        raise ValueError(
            f"{bucket_count}^{u} * 2^{u} = {total} assignments exceeds the "
            f"enumeration bound {MAX_ENUMERATION}"
        )
    s1 = 0
    s2 = 0
    for bmap in itertools.product(range(bucket_count), repeat=u):
        for smap in itertools.product((-1, 1), repeat=u):
            cells = [0] * bucket_count
            for f, b, g in zip(freqs, bmap, smap):
                cells[b] += g * f
            a = sum(c * c for c in cells)
            s1 += a
            s2 += a * a
    mean = Fraction(s1, total)
    variance = Fraction(s2, total) - mean * mean
    return mean, variance


def predicted_variance(freqs: Sequence[int], bucket_count: int) -> Fraction:
    """Closed form ``(2/P) * (F2^2 - F4)``."""
    f2 = exact_moment(freqs, 2)
    f4 = exact_moment(freqs, 4)
    return Fraction(2, bucket_count) * (f2 * f2 - f4)
