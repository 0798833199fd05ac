from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from f2sketch import MomentReport, PartitionSketch, SketchMismatchError, TugOfWarSketch
from f2sketch.hashing import ExhaustiveAssignment, enumerate_assignments, new_family
from f2sketch.oracle import exact_moment, histogram


def stream_from_freqs(freqs):
    return np.repeat(np.arange(len(freqs)), freqs)


@pytest.mark.parametrize("eps, p", [(0.1, 401), (1.0, 5), (0.25, 65), (0.5, 17), (0.01, 40001)])
def test_bucket_count(eps, p):
    assert PartitionSketch(epsilon=eps, random_state=0).fit([]).bucket_count_ == p


@pytest.mark.parametrize("eps", [0, -0.1, 1.5, float("nan")])
def test_rejects_bad_epsilon(eps):
    with pytest.raises(ValueError):
        PartitionSketch(epsilon=eps).fit([])


def test_rejects_bucket_overflow():
    with pytest.raises(ValueError, match="2\\^32"):
        PartitionSketch(epsilon=1e-5).fit([])


def test_empty_sketch():
    sk = PartitionSketch(epsilon=0.5, random_state=1).fit([])
    assert sk.n_items_ == 0
    assert not sk.counters_.any()
    assert sk.estimate() == 0


def test_unfitted_estimate_raises():
    with pytest.raises(NotFittedError):
        PartitionSketch().estimate()


def test_single_update():
    sk = PartitionSketch(epsilon=0.5, random_state=3).fit([])
    x = next(x for x in range(100) if sk.family_.sign(x) == 1)
    sk.update(x)
    want = np.zeros(sk.bucket_count_, dtype=np.int64)
    want[sk.family_.bucket(x)] = 1
    assert np.array_equal(sk.counters_, want)
    assert sk.n_items_ == 1


@pytest.mark.parametrize("f", [1, 2, 7, 1000])
def test_single_element_frequency(f):
    sk = PartitionSketch(epsilon=0.5, random_state=4).fit([42] * f)
    b, g = sk.family_.bucket(42), sk.family_.sign(42)
    assert sk.counters_[b] == g * f
    assert sk.estimate() == f * f


def test_two_elements_in_different_buckets():
    sk = PartitionSketch(epsilon=0.5, random_state=5).fit([])
    fam = sk.family_
    x, y = 0, next(y for y in range(1, 1000) if fam.bucket(y) != fam.bucket(0))
    sk.partial_fit([x, x, x, y, y])
    assert sk.counters_[fam.bucket(x)] == 3 * fam.sign(x)
    assert sk.counters_[fam.bucket(y)] == 2 * fam.sign(y)
    assert np.abs(sk.counters_).sum() == 5


def test_update_matches_batch():
    data = np.random.default_rng(0).integers(0, 50, size=300)
    batch = PartitionSketch(epsilon=0.3, random_state=8).fit(data)
    single = PartitionSketch(epsilon=0.3, random_state=8)
    for x in data:
        single.update(int(x))
    assert np.array_equal(batch.counters_, single.counters_)
    assert single.n_items_ == 300


def test_exhaustive_unbiased_through_the_sketch():
    freqs = (2, 1, 1)
    total = Fraction(0)
    count = 0
    for a in enumerate_assignments(3, 2):
        sk = PartitionSketch(bucket_count=2, hash_family=a).fit(stream_from_freqs(freqs))
        total += sk.estimate()
        count += 1
    assert count == 64
    assert total / count == 6


def test_tug_of_war_exhaustive_mean():
    freqs = (2, 1, 1)
    ests = []
    for a in enumerate_assignments(3, 1):
        ams = TugOfWarSketch(sign_families=[a]).fit(stream_from_freqs(freqs))
        ests.append(ams.estimate())
    assert len(ests) == 8
    assert sum(ests, Fraction(0)) / len(ests) == 6


def test_tug_of_war_basics():
    ams = TugOfWarSketch(epsilon=0.5, n_estimators=1, random_state=1).fit([9] * 6)
    assert ams.estimate() == 36
    assert TugOfWarSketch(epsilon=0.5, random_state=1).fit([]).estimate() == 0
    assert TugOfWarSketch(epsilon=0.5, random_state=1).fit([]).n_estimators_ == 16
    with pytest.raises(ValueError):
        TugOfWarSketch(n_estimators=0).fit([])


def test_tug_of_war_accumulators_bounded():
    data = np.random.default_rng(3).integers(0, 30, size=500)
    ams = TugOfWarSketch(epsilon=0.5, random_state=2).fit(data[:200]).partial_fit(data[200:])
    assert np.all(np.abs(ams.accumulators_) <= ams.n_items_)
    assert ams.n_items_ == 500


def test_tug_of_war_is_unbiased_in_aggregate():
    data = np.random.default_rng(4).integers(0, 40, size=400)
    f2 = exact_moment(histogram(data), 2)
    ests = [float(TugOfWarSketch(epsilon=0.5, random_state=s).fit(data).estimate()) for s in range(300)]
    # relative sd of each estimate is about sqrt(2/16); mean of 300 within 5 sd
    assert abs(np.mean(ests) / f2 - 1) < 5 * (2 / 16) ** 0.5 / 300**0.5


def test_merge_identity_and_halves():
    data = np.random.default_rng(1).integers(0, 10**9, size=2000)
    full = PartitionSketch(epsilon=0.2, random_state=9).fit(data)
    left = PartitionSketch(epsilon=0.2, random_state=9).fit(data[:700])
    right = PartitionSketch(epsilon=0.2, random_state=9).fit(data[700:])
    merged = left.merge(right)
    assert np.array_equal(merged.counters_, full.counters_)
    assert merged.n_items_ == full.n_items_
    empty = PartitionSketch(epsilon=0.2, random_state=9).fit([])
    assert np.array_equal(empty.merge(full).counters_, full.counters_)
    # inputs are untouched
    assert left.n_items_ == 700


def test_merge_rejects_mismatch():
    a = PartitionSketch(epsilon=0.2, random_state=1).fit([1])
    with pytest.raises(SketchMismatchError):
        a.merge(PartitionSketch(epsilon=0.2, random_state=2).fit([1]))
    with pytest.raises(SketchMismatchError):
        a.merge(PartitionSketch(epsilon=0.3, random_state=1).fit([1]))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 2**61 - 2), max_size=300),
    st.lists(st.integers(0, 2**61 - 2), max_size=300),
    st.integers(0, 2**64 - 1),
)
def test_merge_associative_and_commutative(s1, s2, seed):
    a = PartitionSketch(epsilon=0.4, random_state=seed).fit(s1)
    b = PartitionSketch(epsilon=0.4, random_state=seed).fit(s2)
    c = PartitionSketch(epsilon=0.4, random_state=seed).fit(s1 + s2)
    assert np.array_equal(a.merge(b).counters_, c.counters_)
    assert np.array_equal(b.merge(a).counters_, c.counters_)
    assert a.merge(b).estimate() == c.estimate()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1000), max_size=400), st.randoms(), st.integers(0, 2**64 - 1))
def test_order_invariance_and_counter_mass(stream, rnd, seed):
    sk = PartitionSketch(epsilon=0.3, random_state=seed).fit(stream)
    shuffled = list(stream)
    rnd.shuffle(shuffled)
    assert PartitionSketch(epsilon=0.3, random_state=seed).fit(shuffled).estimate() == sk.estimate()
    assert np.abs(sk.counters_).sum() <= sk.n_items_ == len(stream)
    # each update is +-1, so the counter sum has the parity of n
    assert (sk.counters_.sum() - sk.n_items_) % 2 == 0


def test_overflow_guard(monkeypatch):
    sk = PartitionSketch(epsilon=1.0, random_state=1).fit([])
    sk.n_items_ = 2**62 - 1
    with pytest.raises(OverflowError):
        sk.update(1)


def test_input_validation():
    sk = PartitionSketch(epsilon=1.0, random_state=1)
    with pytest.raises(ValueError):
        sk.fit([-1])
    with pytest.raises(TypeError):
        sk.fit([0.5])
    with pytest.raises(ValueError):
        sk.fit(np.zeros((3, 2), dtype=int))
    # column vectors are accepted
    assert sk.fit(np.array([[4], [4]])).estimate() == 4
    assert sk.fit(np.array([4.0, 4.0])).estimate() == 4


def test_sklearn_params_roundtrip():
    sk = PartitionSketch(epsilon=0.2, random_state=3)
    assert sk.get_params() == {"epsilon": 0.2, "bucket_count": None, "random_state": 3, "hash_family": None}
    sk.set_params(epsilon=0.5)
    cl = clone(sk)
    assert cl.get_params()["epsilon"] == 0.5
    assert not hasattr(cl, "counters_")
    assert "PartitionSketch" in repr(sk)


def test_seed_none_records_seed():
    sk = PartitionSketch(epsilon=0.5).fit([1, 2, 3])
    again = PartitionSketch(epsilon=0.5, random_state=sk.seed_).fit([1, 2, 3])
    assert np.array_equal(sk.counters_, again.counters_)


def test_bucket_count_override_and_family_check():
    sk = PartitionSketch(epsilon=0.5, bucket_count=3, random_state=1).fit([1, 2])
    assert sk.bucket_count_ == 3
    with pytest.raises(ValueError):
        PartitionSketch(bucket_count=3, hash_family=new_family(1, 4)).fit([])
    with pytest.raises(ValueError):
        PartitionSketch(bucket_count=0).fit([])


def test_assignment_sketches_merge():
    a = ExhaustiveAssignment((0, 1), (1, -1), 2)
    s1 = PartitionSketch(bucket_count=2, hash_family=a).fit([0, 1])
    s2 = PartitionSketch(bucket_count=2, hash_family=a).fit([1])
    assert s1.merge(s2).counters_.tolist() == [1, -2]
    b = ExhaustiveAssignment((0, 1), (1, 1), 2)
    with pytest.raises(SketchMismatchError):
        s1.merge(PartitionSketch(bucket_count=2, hash_family=b).fit([1]))


def test_moment_report():
    r = MomentReport.from_values(exact_f2=100, exact_f4=1000, estimate=110, encoded_bits=20)
    assert r.relative_error == pytest.approx(0.1)
    assert MomentReport.from_values(0, 0, 0, 2).relative_error == 0.0


def test_functional_entry_points():
    from f2sketch.sketch import (
        ams_baseline_new, ams_estimate, ams_update, sketch_estimate, sketch_merge, sketch_new,
        sketch_update,
    )

    s = sketch_new(0.1, 3)
    assert s.bucket_count_ == 401 and sketch_estimate(s) == 0
    fam = s.family_
    x = next(v for v in range(100) if fam.sign(v) == 1)
    sketch_update(s, x)
    assert s.counters_[fam.bucket(x)] == 1 and np.abs(s.counters_).sum() == 1
    y = next(v for v in range(x + 1, 10**4) if fam.bucket(v) != fam.bucket(x))
    for _ in range(2):
        sketch_update(s, x)
    for _ in range(2):
        sketch_update(s, y)
    assert s.counters_[fam.bucket(x)] == 3
    assert s.counters_[fam.bucket(y)] == 2 * fam.sign(y)
    assert sketch_estimate(s) == 13 and s.n_items_ == 5
    assert sketch_merge(sketch_new(0.1, 3), s).estimate() == 13
    with pytest.raises(SketchMismatchError):
        sketch_merge(sketch_new(0.1, 4), s)

    a = ams_baseline_new(0.5, 1, 9)
    assert ams_estimate(a) == 0
    for _ in range(7):
        ams_update(a, 12)
    assert ams_estimate(a) == 49
    with pytest.raises(ValueError):
        ams_baseline_new(0.5, 0, 9)
