"""F2 estimators with a scikit-learn style interface.

:class:`PartitionSketch` hashes every element to one of ``P`` buckets and adds
a random sign to that bucket's counter; the estimate is the sum of squared
counters. :class:`TugOfWarSketch` is the classic mean-of-``r`` AMS baseline.

Both follow the estimator conventions: constructor arguments are stored
untouched (so ``get_params``/``set_params``/``clone`` work), ``fit`` resets
and consumes a stream, ``partial_fit`` keeps consuming, and fitted state lives
in attributes with a trailing underscore.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import bucket_count_for, check_epsilon, check_seed, check_stream
from .hashing import MAX_BUCKETS, new_family

MAX_ITEMS = 1 << 62
_CHUNK = 1 << 20


class SketchMismatchError(ValueError):
    """Raised when merging sketches built with different parameters or hashes."""


def _sum_squares(values: np.ndarray, n_items: int) -> int:
    # |A[i]| <= n, so sum A[i]^2 <= n^2 fits int64 while n < 3e9
    if n_items < 3_000_000_000:
        return int(np.dot(values, values))
    return sum(int(v) * int(v) for v in values.tolist())


def _signed_bincount(buckets: np.ndarray, signs: np.ndarray, size: int) -> np.ndarray:
    # slot 2b holds +1 updates to bucket b, slot 2b+1 the -1 updates
    slots = 2 * buckets + (signs < 0)
    both = np.bincount(slots, minlength=2 * size).astype(np.int64).reshape(size, 2)
    return both[:, 0] - both[:, 1]


class PartitionSketch(BaseEstimator):
    """Partition-based F2 sketch.

    Parameters
    ----------
    epsilon : float, default=0.1
        Target relative l2-error, in (0, 1]. Sets ``P = ceil(4/eps^2) + 1``.
    bucket_count : int or None, default=None
        Overrides ``P`` for experiments. ``None`` derives it from ``epsilon``.
    random_state : int or None, default=None
        64-bit master seed of the hash family. ``None`` draws one from OS
        entropy; the seed actually used is stored in ``seed_``.
    hash_family : object or None, default=None
        Any object with ``buckets(xs)`` / ``signs(xs)`` methods, used instead
        of a seeded :class:`~f2sketch.hashing.HashFamily`. Mostly for tests
        that enumerate explicit assignments.

    Attributes
    ----------
    counters_ : ndarray of int64, shape (bucket_count_,)
    n_items_ : int
    bucket_count_ : int
    seed_ : int or None
    family_ : HashFamily or the supplied ``hash_family``
    """

    def __init__(self, epsilon=0.1, bucket_count=None, random_state=None, hash_family=None):
        self.epsilon = epsilon
        self.bucket_count = bucket_count
        self.random_state = random_state
        self.hash_family = hash_family

    def _init_state(self):
        epsilon = check_epsilon(self.epsilon)
        if self.bucket_count is None:
            p = bucket_count_for(epsilon)
        else:
            p = int(self.bucket_count)
            if not 1 <= p <= MAX_BUCKETS:
                raise ValueError(f"bucket_count must lie in [1, 2^32], got {p}")
        if self.hash_family is not None:
            family = self.hash_family
            if getattr(family, "bucket_count", p) != p:
                raise ValueError("hash_family.bucket_count does not match the sketch")
            self.seed_ = getattr(family, "seed", None)
        else:
            self.seed_ = check_seed(self.random_state)
            family = new_family(self.seed_, p)
        self.family_ = family
        self.bucket_count_ = p
        self.counters_ = np.zeros(p, dtype=np.int64)
        self.n_items_ = 0
        return self

    def _check_capacity(self, extra: int):
        if self.n_items_ + extra >= MAX_ITEMS:
            raise OverflowError("items_seen would reach 2^62")

    def fit(self, X, y=None):
        """Reset the sketch and consume the stream ``X``."""
        self._init_state()
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        """Consume ``X`` on top of whatever the sketch has already seen."""
        if not hasattr(self, "counters_"):
            self._init_state()
        keys = check_stream(X)
        self._check_capacity(keys.size)
        p = self.bucket_count_
        for start in range(0, keys.size, _CHUNK):
            chunk = keys[start:start + _CHUNK]
            b, g = self.family_.buckets_and_signs(chunk)
            self.counters_ += _signed_bincount(b, g, p)
        self.n_items_ += int(keys.size)
        return self

    def update(self, x):
        """Add one occurrence of ``x``; changes exactly one counter by +-1."""
        if not hasattr(self, "counters_"):
            self._init_state()
        self._check_capacity(1)
        self.counters_[self.family_.bucket(x)] += self.family_.sign(x)
        self.n_items_ += 1
        return self

    def estimate(self) -> int:
        """Sum of squared counters, as an exact Python int."""
        check_is_fitted(self, "counters_")
        return _sum_squares(self.counters_, self.n_items_)

    def _same_hashing(self, other) -> bool:
        if self.bucket_count_ != other.bucket_count_:
            return False
        if self.seed_ is not None or other.seed_ is not None:
            return self.seed_ == other.seed_ and type(self.family_) is type(other.family_)
        return self.family_ == other.family_

    def merge(self, other: "PartitionSketch") -> "PartitionSketch":
        """Return a new sketch equal to the sketch of both streams concatenated."""
        check_is_fitted(self, "counters_")
        check_is_fitted(other, "counters_")
        if check_epsilon(self.epsilon) != check_epsilon(other.epsilon) or not self._same_hashing(other):
            raise SketchMismatchError("sketches differ in epsilon, bucket count or hash seeds")
        self._check_capacity(other.n_items_)
        merged = self._copy()
        merged.counters_ = self.counters_ + other.counters_
        merged.n_items_ = self.n_items_ + other.n_items_
        return merged

    def _copy(self) -> "PartitionSketch":
        new = PartitionSketch(**self.get_params())
        new.family_ = self.family_
        new.seed_ = self.seed_
        new.bucket_count_ = self.bucket_count_
        new.counters_ = self.counters_.copy()
        new.n_items_ = self.n_items_
        return new

    @classmethod
    def from_state(cls, epsilon, bucket_count, seed, counters, n_items) -> "PartitionSketch":
        """Rebuild a fitted sketch from raw state (used by the decoder)."""
        est = cls(epsilon=epsilon, bucket_count=bucket_count, random_state=seed)
        est.seed_ = int(seed)
        est.bucket_count_ = int(bucket_count)
        est.family_ = new_family(est.seed_, est.bucket_count_)
        est.counters_ = np.asarray(counters, dtype=np.int64).copy()
        if est.counters_.shape != (est.bucket_count_,):
            raise ValueError("counter array length does not match bucket_count")
        est.n_items_ = int(n_items)
        return est


class TugOfWarSketch(BaseEstimator):
    """Mean of ``r`` independent AMS tug-of-war estimators.

    Each estimator keeps one accumulator ``Z_j = sum_x gamma_j(x) f_x`` and the
    estimate is ``(1/r) sum_j Z_j^2``, returned as an exact ``Fraction``.
    ``n_estimators=None`` uses ``r = ceil(4/eps^2)``, which matches the
    variance of :class:`PartitionSketch` at the same ``epsilon``.
    """

    def __init__(self, epsilon=0.1, n_estimators=None, random_state=None, sign_families=None):
        self.epsilon = epsilon
        self.n_estimators = n_estimators
        self.random_state = random_state
        self.sign_families = sign_families

    def _init_state(self):
        epsilon = check_epsilon(self.epsilon)
        if self.sign_families is not None:
            families = list(self.sign_families)
            r = len(families)
            self.seed_ = None
        else:
            r = bucket_count_for(epsilon) - 1 if self.n_estimators is None else int(self.n_estimators)
            if r < 1:
                raise ValueError(f"n_estimators must be >= 1, got {r}")
            self.seed_ = check_seed(self.random_state)
            children = np.random.SeedSequence(self.seed_).generate_state(r, np.uint64)
            families = [new_family(int(s), 1) for s in children]
        if r < 1:
            raise ValueError("need at least one sign family")
        self.families_ = families
        self.n_estimators_ = r
        self.accumulators_ = np.zeros(r, dtype=np.int64)
        self.n_items_ = 0
        return self

    def fit(self, X, y=None):
        self._init_state()
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        if not hasattr(self, "accumulators_"):
            self._init_state()
        keys = check_stream(X)
        if self.n_items_ + keys.size >= MAX_ITEMS:
            raise OverflowError("items_seen would reach 2^62")
        for start in range(0, keys.size, _CHUNK):
            chunk = keys[start:start + _CHUNK]
            for j, fam in enumerate(self.families_):
                self.accumulators_[j] += int(fam.signs(chunk).sum())
        self.n_items_ += int(keys.size)
        return self

    def update(self, x):
        return self.partial_fit([x])

    def estimate(self) -> Fraction:
        check_is_fitted(self, "accumulators_")
        return Fraction(_sum_squares(self.accumulators_, self.n_items_), self.n_estimators_)


@dataclass(frozen=True)
class MomentReport:
    """Exact moments next to one sketch's estimate and encoded size."""

    exact_f2: int
    exact_f4: int
    estimate: int
    relative_error: float
    encoded_bits: int

    @classmethod
    def from_values(cls, exact_f2, exact_f4, estimate, encoded_bits) -> "MomentReport":
        rel = abs(estimate - exact_f2) / exact_f2 if exact_f2 > 0 else 0.0
        return cls(exact_f2, exact_f4, estimate, float(rel), encoded_bits)


# Functional entry points over the estimator objects. Updates mutate and
# return the state they were given.


def sketch_new(epsilon: float, seed: int) -> PartitionSketch:
    """Empty sketch with ``P = ceil(4/eps^2) + 1`` zero counters."""
    return PartitionSketch(epsilon=epsilon, random_state=seed)._init_state()


def sketch_update(state: PartitionSketch, x: int) -> PartitionSketch:
    return state.update(x)


def sketch_estimate(state: PartitionSketch) -> int:
    return state.estimate()


def sketch_merge(a: PartitionSketch, b: PartitionSketch) -> PartitionSketch:
    return a.merge(b)


def ams_baseline_new(epsilon: float, estimator_count: int, seed: int) -> TugOfWarSketch:
    return TugOfWarSketch(epsilon=epsilon, n_estimators=estimator_count, random_state=seed)._init_state()


def ams_update(state: TugOfWarSketch, x: int) -> TugOfWarSketch:
    return state.update(x)


def ams_estimate(state: TugOfWarSketch) -> Fraction:
    return state.estimate()
