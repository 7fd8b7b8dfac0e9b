import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardamp.core import (
    BitVec,
    CallCounter,
    Estimate,
    MonotoneFn,
    PredicateOracle,
    SeedPath,
    as_int,
    bernoulli_vec,
    chernoff_samples,
    estimate_mean_batched,
    estimate_probability,
    exact_fraction,
    is_monotone,
    mix64,
    mix64_np,
    range_samples,
    success_prob_exact,
    uniform_from_u64,
)

from oracles import brute_accept


@given(st.integers(1, 20), st.data())
def test_bitvec_int_roundtrip(n, data):
    v = data.draw(st.integers(0, (1 << n) - 1))
    bv = BitVec.from_int(v, n)
    assert bv.to_int() == v
    assert BitVec.from_str(str(bv)) == bv
    assert as_int(bv, n) == v


def test_bitvec_order_is_lexicographic():
    strs = sorted(format(i, "05b") for i in range(32))
    assert [BitVec.from_str(s).to_int() for s in strs] == list(range(32))


def test_bitvec_rejects_bad_input():
    with pytest.raises(ValueError):
        BitVec.from_int(8, 3)
    with pytest.raises(ValueError):
        BitVec((0, 2))
    with pytest.raises(ValueError):
        as_int(9, 3)


@given(st.integers(0, 2**64 - 1))
def test_mix64_scalar_matches_vector(x):
    assert int(mix64_np(np.array([x], dtype=np.uint64))[0]) == mix64(x)


def test_uniform_from_u64_range():
    u = uniform_from_u64(np.array([0, 2**64 - 1], dtype=np.uint64))
    assert u[0] == 0.0 and 0 < u[1] < 1


@given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 2**40), max_size=4))
def test_seedpath_deterministic(root, path):
    a, b = SeedPath(root, tuple(path)), SeedPath(root, tuple(path))
    assert a.key() == b.key()
    assert a.stream().next64() == b.stream().next64()
    assert np.array_equal(a.rng().integers(0, 1000, 5), b.rng().integers(0, 1000, 5))


def test_seedpath_children_differ():
    s = SeedPath(7)
    keys = {s.child(i).key() for i in range(1000)}
    assert len(keys) == 1000
    assert s.named("a").key() != s.named("b").key()


def test_seedpath_validation():
    with pytest.raises(ValueError):
        SeedPath(-1)
    with pytest.raises(ValueError):
        SeedPath(0, (-2,))


def test_stream_randbelow_in_range():
    s = SeedPath(3).stream()
    vals = [s.randbelow(7) for _ in range(2000)]
    assert set(vals) == set(range(7))


def test_call_counter():
    c = CallCounter()
    c.add(3)
    c.add()
    assert c.value == 4 and int(c) == 4
    c.reset()
    assert c.value == 0


def test_predicate_oracle_counts_and_table():
    p = PredicateOracle(3, table=[0, 1, 1, 0, 1, 0, 0, 1])
    assert p.eval(BitVec.from_str("001")) == 1
    assert list(p.eval_many([0, 7])) == [0, 1]
    assert p.calls.value == 3
    p.full_table()
    assert p.calls.value == 11
    with pytest.raises(ValueError):
        PredicateOracle(2, table=[0, 1, 2, 0])
    with pytest.raises(ValueError):
        PredicateOracle(2)


def test_predicate_callable_mode():
    p = PredicateOracle(4, fn=lambda xs: xs & 1)
    assert not p.tabulated
    assert p.eval(5) == 1
    with pytest.raises(TypeError):
        p.table


def test_monotone_constructors():
    assert MonotoneFn.AND(3)(1, 1, 1) == 1 and MonotoneFn.AND(3)(1, 0, 1) == 0
    assert MonotoneFn.OR(3)(0, 0, 0) == 0 and MonotoneFn.OR(3)(0, 1, 0) == 1
    assert MonotoneFn.threshold(3, 2)(1, 1, 0) == 1
    assert MonotoneFn.threshold(3, 2)(1, 0, 0) == 0


def test_restrict_first_fixes_coordinate_zero():
    g = MonotoneFn(3, fn=lambda u: u[0] & (u[1] | u[2]))
    g1, g0 = g.restrict_first(1), g.restrict_first(0)
    for a in (0, 1):
        for b in (0, 1):
            assert g1(a, b) == (a | b)
            assert g0(a, b) == 0


def test_is_monotone():
    assert is_monotone(MonotoneFn.threshold(4, 2)) == 1
    assert is_monotone(MonotoneFn(2, table=[1, 0, 0, 0])) == 0


# [DERIVED] by enumeration: OR3 and AND3 at delta = 1/4
def test_success_prob_or3_and3_exact():
    d = Fraction(1, 4)
    assert success_prob_exact(MonotoneFn.OR(3), d) == Fraction(37, 64) == Fraction("0.578125")
    assert success_prob_exact(MonotoneFn.AND(3), d) == Fraction(1, 64) == Fraction("0.015625")


@given(st.integers(1, 6), st.data(), st.fractions(0, 1, max_denominator=64))
def test_success_prob_matches_enumeration(k, data, delta):
    bits = data.draw(st.lists(st.integers(0, 1), min_size=1 << k, max_size=1 << k))
    g = MonotoneFn(k, table=bits)
    assert success_prob_exact(g, delta) == brute_accept(g.eval, k, delta)


def test_sample_counts():
    assert chernoff_samples(0.1, 1e-3) == math.ceil(math.log(2000) / 0.02)
    assert range_samples(0.1, 1e-3, 2.0) == math.ceil(4 * math.log(2000) / 0.02)
    with pytest.raises(ValueError):
        chernoff_samples(0, 0.1)
    with pytest.raises(ValueError):
        chernoff_samples(0.1, 1)


def test_exact_fraction_decimal_reading():
    assert exact_fraction(0.1) == Fraction(1, 10)
    assert exact_fraction(3) == 3
    assert exact_fraction(Fraction(2, 7)) == Fraction(2, 7)


def test_estimate_validation():
    with pytest.raises(ValueError):
        Estimate(0.5, 0.0, 0.9, 10)
    e = Estimate(0.5, 0.1, 0.9, 10)
    assert e.low == 0.4 and e.high == 0.6
    assert set(e.as_dict()) == {"value", "half_width", "confidence", "samples"}


def test_estimate_probability_independent_of_jobs():
    trial = lambda s: s.stream().bernoulli(0.3)
    a = estimate_probability(trial, 0.05, 1e-2, SeedPath(1), jobs=1)
    b = estimate_probability(trial, 0.05, 1e-2, SeedPath(1), jobs=4)
    assert a == b
    assert abs(a.value - 0.3) <= a.half_width


def test_estimate_mean_batched_jobs_and_chunking():
    batch = lambda rng, size: (rng.random(size) < 0.7).astype(float)
    a = estimate_mean_batched(batch, 0.01, 1e-3, SeedPath(5), chunk=4096)
    b = estimate_mean_batched(batch, 0.01, 1e-3, SeedPath(5), chunk=4096, jobs=3)
    assert a == b
    assert abs(a.value - 0.7) <= a.half_width


def test_estimate_mean_batched_rejects_bad_batch():
    with pytest.raises(ValueError):
        estimate_mean_batched(lambda rng, size: np.zeros(size + 1), 0.1, 0.1, SeedPath(0))


def test_bernoulli_vec():
    assert bernoulli_vec(0, 5, SeedPath(1)) == (0,) * 5
    assert bernoulli_vec(1, 5, SeedPath(1)) == (1,) * 5
    with pytest.raises(ValueError):
        bernoulli_vec(2, 3, SeedPath(0))
