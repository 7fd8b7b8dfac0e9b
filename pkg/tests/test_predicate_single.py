from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardamp.core import PredicateOracle, SeedPath, uniform_from_u64
from hardamp.predicate_single import (
    CoinPredictor,
    Distinguisher,
    FixedRandomnessDistinguisher,
    FullDomain,
    GenError,
    HardSetRecognizer,
    TranscriptMonitor,
    delta_x,
    gen_single,
    interpolation_prob,
    order_le,
    planted_distinguisher,
    planted_instance,
    q_predict,
    verify_theorem1,
)

from oracles import brute_delta_x


def _small_instance(n=6, seed=0):
    return planted_instance(n, SeedPath(seed))


def constant_distinguisher(n, value=1):
    return Distinguisher(n, lambda x, b, r: np.full(np.broadcast_shapes(np.shape(x), np.shape(b), np.shape(r)), value, np.uint8), name="const", accept_table=np.full((1 << n, 2), float(value)))


def revealing_instance(n, seed):
    """C knows P exactly on half the inputs and ignores b elsewhere."""
    rng = SeedPath(seed).rng()
    N = 1 << n
    ptab = rng.integers(0, 2, size=N).astype(np.uint8)
    p = PredicateOracle(n, table=ptab)
    acc = np.full((N, 2), 0.5)
    known = rng.permutation(N)[: N // 2]
    acc[known, ptab[known]] = 1.0
    acc[known, 1 - ptab[known]] = 0.0
    return p, planted_distinguisher(p, acc)


def test_fixed_randomness_size_exact():
    assert FixedRandomnessDistinguisher.size_for(10, 0.1) == 100000
    assert FixedRandomnessDistinguisher.size_for(8, Fraction(1, 3)) == 7200


def test_delta_x_matches_brute_force():
    p, c, _ = _small_instance()
    cp = FixedRandomnessDistinguisher.sample(c, 0.9, SeedPath(1))
    fn = lambda x, b, r: c._raw(np.int64(x), np.uint8(b), np.uint64(r))
    for x in range(0, 64, 7):
        assert delta_x(cp, p, x) == brute_delta_x(fn, cp.rs.tolist(), p.table, x)


def test_ones_costs_m_calls_and_counts_are_memoized():
    p, c, _ = _small_instance()
    cp = FixedRandomnessDistinguisher.sample(c, 0.9, SeedPath(1))
    c.calls.reset()
    cp.ones(3, 1)
    assert c.calls.value == cp.m
    c.calls.reset()
    cp.counts(5)
    cp.counts(5)
    assert c.calls.value == 2 * cp.m


def test_order_is_total_and_consistent():
    p, c, _ = _small_instance()
    cp = FixedRandomnessDistinguisher.sample(c, 0.9, SeedPath(2))
    xs = list(range(20))
    for a in xs:
        for b in xs:
            assert order_le(a, b, cp, p) or order_le(b, a, cp, p)
            if a != b:
                assert not (order_le(a, b, cp, p) and order_le(b, a, cp, p))


def test_recognizer_routes_agree():
    p, c, _ = _small_instance()
    cp = FixedRandomnessDistinguisher.sample(c, 0.9, SeedPath(3))
    ds = delta_x(cp, p, 17)
    s = HardSetRecognizer(cp, 17, ds)
    mask = s.members_mask(p.table)
    for x in range(64):
        px = int(p.table[x])
        assert bool(s.member(x, px)) == s.contains(x, px) == bool(mask[x])
        assert mask[x] == bool(order_le(x, 17, cp, p))


def test_recognizer_membership_cost_and_obliviousness():
    p, c, _ = _small_instance()
    cp = FixedRandomnessDistinguisher.sample(c, 0.9, SeedPath(3))
    mon = TranscriptMonitor(c)
    s = HardSetRecognizer(cp.with_base(mon), 17, Fraction(0))
    c.calls.reset()
    s.member(9, 1)
    assert c.calls.value == 2 * cp.m
    assert mon.forwarded_only(9)


@given(st.fractions(-1, 1), st.fractions(Fraction(1, 1000), 1))
def test_interpolation_prob_properties(gap, ds):
    pr = interpolation_prob(gap, ds)
    assert 0 <= pr <= 1
    assert interpolation_prob(-gap, ds) == 1 - pr
    if gap >= ds:
        assert pr == 1
    if abs(gap) < ds:
        assert pr == (1 + gap / ds) / 2


def test_coin_predictor_has_no_calls():
    q = CoinPredictor(SeedPath(1))
    assert q.prob_one(3) == Fraction(1, 2)
    bits = [q.predict(3) for _ in range(400)]
    assert 100 < sum(bits) < 300


def test_constant_distinguisher_gives_full_domain():
    p = PredicateOracle.random(6, SeedPath(4))
    c = constant_distinguisher(6)
    out = gen_single(c, p, 0.3, 1e-3, SeedPath(5))
    assert out.full_domain and out.delta == 1.0
    assert isinstance(out.s, FullDomain)
    rep = verify_theorem1(out, c, p, 0.3)
    assert rep.passed and rep.indist_gap == 0


def test_gen_single_validation():
    p, c, _ = _small_instance()
    with pytest.raises(ValueError):
        gen_single(c, p, 0, 1e-3, SeedPath(0))
    with pytest.raises(ValueError):
        gen_single(c, p, 1.0, 1e-3, SeedPath(0))
    with pytest.raises(ValueError):
        gen_single(c, PredicateOracle.random(5, SeedPath(0)), 0.5, 1e-3, SeedPath(0))
    with pytest.raises(ValueError):
        gen_single(c, p, 0.5, 1e-3, SeedPath(0), on_exhaustion="ignore")
    small = PredicateOracle.random(3, SeedPath(0))
    with pytest.raises(ValueError):
        gen_single(constant_distinguisher(3), small, 0.5, 1e-3, SeedPath(0))


@settings(max_examples=8)
@given(st.integers(0, 10**6), st.sampled_from([0.15, 0.2, 0.25]))
def test_theorem1_properties_on_planted_instances(seed, eps):
    p, c, _ = planted_instance(6, SeedPath(seed))
    out = gen_single(c, p, eps, 1e-3, SeedPath(seed + 1))
    rep = verify_theorem1(out, c, p, eps)
    assert rep.passed, rep.as_dict()


@settings(max_examples=4)
@given(st.integers(0, 10**6))
def test_strict_gain_on_planted_instances(seed):
    p, c, _ = planted_instance(6, SeedPath(seed))
    out = gen_single(c, p, 0.2, 1e-3, SeedPath(seed + 1), strict_gain=True)
    rep = verify_theorem1(out, c, p, 0.2)
    assert rep.passed, rep.as_dict()
    if out.delta < 1:
        assert "predictability_gain" in rep.checks


def test_predictor_costs_and_forwarding():
    p, c, _ = _small_instance()
    out = gen_single(c, p, 0.2, 1e-3, SeedPath(9))
    assert not out.full_domain
    m = out.s.cprime.m
    mon = TranscriptMonitor(c)
    q = out.q.with_base(mon)
    c.calls.reset()
    q_predict(q, 11)
    assert c.calls.value == 2 * m <= 200 * 6 / Fraction(1, 5) ** 2
    assert mon.forwarded_only(11)


def test_predictor_output_law_matches_prob_one():
    p, c, _ = _small_instance()
    out = gen_single(c, p, 0.2, 1e-3, SeedPath(9))
    q = out.q
    c0, c1 = q.cprime.counts(0)
    us = np.linspace(0, 1, 2001)[:-1] + 0.00025
    freq = np.mean([q.decide(c1, c0, u) for u in us])
    assert abs(freq - float(q.prob_one(0))) <= 1e-3


def test_exhausted_candidates_fall_back_to_exact_prefix():
    # prefix sums jump by 1/64 which misses the sampled window at eps = 0.17
    p, c = revealing_instance(6, 3)
    with pytest.raises(GenError):
        gen_single(c, p, 0.17, 1e-3, SeedPath(1), on_exhaustion="raise")
    out = gen_single(c, p, 0.17, 1e-3, SeedPath(1))
    assert out.diagnostics["branch"] == "exact-fallback"
    rep = verify_theorem1(out, c, p, 0.17)
    assert rep.passed, rep.as_dict()


def test_weak_confidence_reports_without_crashing():
    p, c, _ = _small_instance(seed=4)
    out = gen_single(c, p, 0.5, 0.5, SeedPath(2))
    rep = verify_theorem1(out, c, p, 0.5)
    assert set(rep.checks) >= {"large_set", "indistinguishability", "predictability"}
    assert isinstance(rep.violations, list)


def test_negation_shares_counter():
    p, c, _ = _small_instance()
    nc = c.negated()
    c.calls.reset()
    a = c.eval(3, 1, 12345)
    b = nc.eval(3, 1, 12345)
    assert a + b == 1 and c.calls.value == 2


def test_planted_table_is_realized():
    p, c, _ = _small_instance()
    r = SeedPath(0).rng().integers(0, 1 << 64, size=20000, dtype=np.uint64)
    freq = c.eval_many(np.int64(5), np.uint8(1), r).mean()
    assert abs(freq - c.accept_table[5, 1]) < 0.02
    assert np.array_equal(c.eval_many(np.int64(5), np.uint8(1), r), (uniform_from_u64(r) < c.accept_table[5, 1]).astype(np.uint8))
