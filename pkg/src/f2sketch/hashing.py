"""Seeded 4-wise independent hashing over the Mersenne field GF(2^61 - 1).

Two hash functions are drawn per family:

* a bucket hash ``H: U -> [0, P)``
* a sign hash ``gamma: U -> {-1, +1}``

Each is a uniformly random degree-3 polynomial over the field, which makes
the values at any four distinct keys jointly uniform. Field values are mapped
to buckets by multiply-then-scale (``floor(h * P / 2^61)``), so the bucket
bias is at most ``P / 2^61``.

Both a scalar path (plain Python ints) and a vectorised numpy path are
provided. They compute the same function and the test-suite checks that.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

MERSENNE_61 = (1 << 61) - 1
INDEPENDENCE_K = 4
MAX_BUCKETS = 1 << 32
# bucket bias must stay below 2^-20
MIN_FIELD_MARGIN = 1 << 20
MAX_ENUMERATION = 10**7

# Splitting constants that derive the bucket / sign seeds from the master seed.
_BUCKET_STREAM = 0x48
_SIGN_STREAM = 0x67

_U64 = np.uint64
_MASK32 = _U64(0xFFFFFFFF)
_MASK29 = _U64((1 << 29) - 1)
_P61 = _U64(MERSENNE_61)


def _coefficients(seed: int, stream: int) -> tuple[int, ...]:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, stream])
    rng = np.random.default_rng(ss)
    draws = rng.integers(0, MERSENNE_61, size=INDEPENDENCE_K, dtype=np.uint64)
    return tuple(int(c) for c in draws)


def _poly_scalar(coefs: tuple[int, ...], x: int) -> int:
    acc = 0
    for c in coefs:
        acc = (acc * x + c) % MERSENNE_61
    return acc


def _split(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return v >> _U64(32), v & _MASK32


def _fold(lo: np.ndarray, hh: np.ndarray, mid: np.ndarray) -> np.ndarray:
    """Combine ``hh*2^64 + mid*2^32 + lo`` into a value in ``[0, p]``.

    Inputs satisfy ``hh < 2^58``, ``mid < 2^62``; ``lo`` is any uint64.
    All arrays are consumed in place.
    """
    # 2^64 == 8 and 2^61 == 1 (mod p)
    s = lo >> _U64(61)
    lo &= _P61
    s += lo
    hh <<= _U64(3)
    s += hh
    s += mid >> _U64(29)
    mid &= _MASK29
    mid <<= _U64(32)
    s += mid
    # s < 2^63 here; two folds bring it to [0, p]
    for _ in range(2):
        hi = s >> _U64(61)
        s &= _P61
        s += hi
    return s


def _mulmod(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``a * x mod (2^61 - 1)`` for uint64 arrays with both operands <= p.

    The result lies in ``[0, p]``; ``p`` itself stands for zero.
    """
    a_hi, a_lo = _split(a)
    x_hi, x_lo = _split(x)
    mid = a_hi * x_lo
    mid += a_lo * x_hi
    return _fold(a_lo * x_lo, a_hi * x_hi, mid)


def _mulmod_const(c: int, x_hi: np.ndarray, x_lo: np.ndarray) -> np.ndarray:
    c_hi, c_lo = _U64(c >> 32), _U64(c & 0xFFFFFFFF)
    mid = x_lo * c_hi
    mid += x_hi * c_lo
    return _fold(x_lo * c_lo, x_hi * c_hi, mid)


def _canonical(v: np.ndarray) -> np.ndarray:
    v[v == _P61] = 0
    return v


def _powers(x: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split forms of ``x, x^2, ..., x^(k-1)``."""
    out = [_split(x)]
    cur = x
    for _ in range(INDEPENDENCE_K - 2):
        cur = _mulmod(cur, x)
        out.append(_split(cur))
    return out


def _poly_from_powers(coefs: tuple[int, ...], powers) -> np.ndarray:
    # coefs are highest degree first; powers[i] holds x^(i+1)
    acc = np.full(powers[0][0].shape, coefs[-1], dtype=np.uint64)
    for c, (hi, lo) in zip(reversed(coefs[:-1]), powers):
        acc += _mulmod_const(c, hi, lo)
        # acc < 2^62: fold once to [0, p]
        top = acc >> _U64(61)
        acc &= _P61
        acc += top
    return _canonical(acc)


def _poly_vector(coefs: tuple[int, ...], x: np.ndarray) -> np.ndarray:
    return _poly_from_powers(coefs, _powers(x))


def _scale_scalar(h: int, buckets: int) -> int:
    return (h * buckets) >> 61


def _scale_vector(h: np.ndarray, buckets: int) -> np.ndarray:
    # exact floor(h * P / 2^61) without 128-bit products
    p = _U64(buckets)
    hi, lo = h >> _U64(32), h & _MASK32
    if buckets == MAX_BUCKETS:
        # lo * 2^32 >> 32 == lo; hi * 2^32 < 2^61
        return ((hi << _U64(32)) + lo) >> _U64(29)
    return (hi * p + ((lo * p) >> _U64(32))) >> _U64(29)


def _check_key(x) -> int:
    x = int(x)
    if x < 0 or x >= MERSENNE_61:
        raise ValueError(f"universe element {x} outside [0, 2^61 - 1)")
    return x


def as_keys(xs) -> np.ndarray:
    """Convert ``xs`` to a 1-d uint64 key array, rejecting ids outside the field."""
    arr = np.asarray(xs)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint64)
    if arr.dtype == object:
        vals = [_check_key(v) for v in arr.tolist()]
        return np.asarray(vals, dtype=np.uint64)
    if not np.issubdtype(arr.dtype, np.integer):
        raise TypeError(f"universe elements must be integers, got dtype {arr.dtype}")
    if np.issubdtype(arr.dtype, np.signedinteger) and arr.min() < 0:
        raise ValueError("universe elements must be non-negative")
    keys = arr.astype(np.uint64, copy=False)
    if keys.max() >= _P61:
        raise ValueError("universe elements must lie below 2^61 - 1")
    return keys


@dataclass(frozen=True)
class HashFamily:
    """A seeded pair (bucket hash, sign hash); immutable and thread-safe."""

    seed: int
    bucket_count: int
    bucket_coefficients: tuple[int, ...]
    sign_coefficients: tuple[int, ...]
    independence_k: int = INDEPENDENCE_K

    def bucket(self, x: int) -> int:
        return _scale_scalar(_poly_scalar(self.bucket_coefficients, _check_key(x)), self.bucket_count)

    def sign(self, x: int) -> int:
        h = _poly_scalar(self.sign_coefficients, _check_key(x))
        return 1 - 2 * (h & 1)

    def buckets(self, xs) -> np.ndarray:
        return self.buckets_and_signs(xs)[0]

    def signs(self, xs) -> np.ndarray:
        keys = as_keys(xs)
        return self._signs(_poly_vector(self.sign_coefficients, keys))

    def buckets_and_signs(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Both hashes over one key array, sharing the powers of each key."""
        keys = as_keys(xs)
        powers = _powers(keys)
        if self.bucket_count == 1:
            b = np.zeros(keys.shape, dtype=np.int64)
        else:
            h = _poly_from_powers(self.bucket_coefficients, powers)
            b = _scale_vector(h, self.bucket_count).astype(np.int64)
        return b, self._signs(_poly_from_powers(self.sign_coefficients, powers))

    @staticmethod
    def _signs(h: np.ndarray) -> np.ndarray:
        return 1 - 2 * (h & _U64(1)).astype(np.int64)


def new_family(seed: int, bucket_count: int) -> HashFamily:
    """Draw the bucket and sign polynomials for ``seed``.

    Raises ``ValueError`` when ``bucket_count`` is zero or so large that the
    field order no longer exceeds it by a factor of 2^20.
    """
    bucket_count = int(bucket_count)
    if bucket_count < 1:
        raise ValueError("bucket_count must be >= 1")
    if bucket_count > MAX_BUCKETS or MERSENNE_61 // bucket_count < MIN_FIELD_MARGIN:
        raise ValueError(f"bucket_count {bucket_count} exceeds the limit 2^32")
    seed = int(seed)
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must be a 64-bit non-negative integer")
    return HashFamily(
        seed=seed,
        bucket_count=bucket_count,
        bucket_coefficients=_coefficients(seed, _BUCKET_STREAM),
        sign_coefficients=_coefficients(seed, _SIGN_STREAM),
    )


def eval_bucket(family: HashFamily, x: int) -> int:
    return family.bucket(x)


def eval_sign(family: HashFamily, x: int) -> int:
    return family.sign(x)


@dataclass(frozen=True)
class ExhaustiveAssignment:
    """An explicit hash assignment over the tiny universe ``{0, ..., u-1}``.

    Exposes the same ``bucket``/``sign``/``buckets``/``signs`` surface as
    :class:`HashFamily`, so a sketch can run on it directly. Enumerating all
    of them realises truly random hashing exactly.
    """

    bucket_map: tuple[int, ...]
    sign_map: tuple[int, ...]
    bucket_count: int

    @property
    def universe_size(self) -> int:
        return len(self.bucket_map)

    def bucket(self, x: int) -> int:
        return self.bucket_map[x]

    def sign(self, x: int) -> int:
        return self.sign_map[x]

    def buckets(self, xs) -> np.ndarray:
        return np.asarray(self.bucket_map, dtype=np.int64)[np.asarray(xs, dtype=np.int64)]

    def signs(self, xs) -> np.ndarray:
        return np.asarray(self.sign_map, dtype=np.int64)[np.asarray(xs, dtype=np.int64)]

    def buckets_and_signs(self, xs) -> tuple[np.ndarray, np.ndarray]:
        return self.buckets(xs), self.signs(xs)


def enumerate_assignments(universe_size: int, bucket_count: int) -> Iterator[ExhaustiveAssignment]:
    """Yield every (bucket map, sign map) pair over a tiny universe once."""
    if universe_size < 0 or bucket_count < 1:
        raise ValueError("need universe_size >= 0 and bucket_count >= 1")
    total = bucket_count**universe_size * 2**universe_size
    if total > MAX_ENUMERATION:
        raise ValueError(
            f"{bucket_count}^{universe_size} * 2^{universe_size} = {total} assignments "
            f"exceeds the enumeration bound {MAX_ENUMERATION}"
        )
    bucket_maps = list(itertools.product(range(bucket_count), repeat=universe_size))
    sign_maps = list(itertools.product((-1, 1), repeat=universe_size))
    for bmap in bucket_maps:
        for smap in sign_maps:
            yield ExhaustiveAssignment(bmap, smap, bucket_count)
