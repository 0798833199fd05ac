from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from f2sketch.oracle import (
    Histogram,
    exact_moment,
    exhaustive_sketch_moments,
    histogram,
    predicted_variance,
)


def test_empty_histogram():
    h = histogram([])
    assert h.n == 0 and len(h) == 0
    assert exact_moment(h, 2) == 0


def test_small_histogram():
    h = histogram([7, 7, 9])
    assert dict(h.counts) == {7: 2, 9: 1}
    assert h.n == 3


@pytest.mark.parametrize("p, want", [(0, 3), (1, 4), (2, 6), (3, 10), (4, 18)])
def test_moments_of_211(p, want):
    assert exact_moment({"a": 2, "b": 1, "c": 1}, p) == want


def test_moments_are_exact_for_large_values():
    f = 3_000_000_000
    assert exact_moment([f], 4) == f**4
    h = Histogram(np.array([1], dtype=np.uint64), np.array([f], dtype=np.int64), f)
    assert exact_moment(h, 8) == f**8
    # right at the int64 boundary the two paths must agree
    h2 = Histogram(np.array([1, 2], dtype=np.uint64), np.array([2**31, 2**31 - 1], dtype=np.int64), 2**32 - 1)
    assert exact_moment(h2, 2) == 2**62 + (2**31 - 1) ** 2


def test_moment_order_guard():
    with pytest.raises(ValueError):
        exact_moment([1], 9)


@given(st.lists(st.integers(0, 20), max_size=200), st.randoms())
def test_f1_is_length_and_order_invariant(stream, rnd):
    h = histogram(stream)
    assert exact_moment(h, 1) == len(stream)
    shuffled = list(stream)
    rnd.shuffle(shuffled)
    for p in range(5):
        assert exact_moment(histogram(shuffled), p) == exact_moment(h, p)


def test_histogram_accepts_uint64_arrays():
    h = histogram(np.array([2**60, 2**60, 5], dtype=np.uint64))
    assert h.counts == {2**60: 2, 5: 1}


def test_exhaustive_211_p2():
    mean, var = exhaustive_sketch_moments((2, 1, 1), 2)
    assert mean == 6
    assert var == 18
    assert isinstance(var, Fraction)


@pytest.mark.parametrize("f", [1, 2, 5])
@pytest.mark.parametrize("p", [1, 2, 3])
def test_single_element_has_no_variance(f, p):
    mean, var = exhaustive_sketch_moments((f,), p)
    assert mean == f * f and var == 0


def test_one_bucket_reduces_to_tug_of_war():
    # P = 1 is the AMS estimator, variance 2(F2^2 - F4)
    mean, var = exhaustive_sketch_moments((3, 2, 1), 1)
    assert mean == 14
    assert var == 2 * (14**2 - 98)


@pytest.mark.parametrize("freqs", [(1, 1), (2, 1), (1, 1, 1, 1), (4, 1, 2)])
@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_identity_on_more_shapes(freqs, p):
    mean, var = exhaustive_sketch_moments(freqs, p)
    assert mean == exact_moment(freqs, 2)
    assert var == predicted_variance(freqs, p)


def test_exhaustive_guard():
    with pytest.raises(ValueError, match="enumeration bound"):
        exhaustive_sketch_moments((1,) * 12, 4)
