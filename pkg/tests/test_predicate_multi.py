import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardamp.core import PredicateOracle, SeedPath, mix64_np, uniform_from_u64
from hardamp.predicate_multi import (
    InducedDistinguisher,
    MultiDistinguisher,
    MultiMonitor,
    PairSource,
    Prefix,
    PrefixSetGenerator,
    backdoor_xor_attacker,
    experiment1,
    experiment1_trace,
    experiment2,
    extraction_experiment,
    gen_multi,
    hybrid,
    hybrid_trace,
    noisy_xor_attacker,
    noisy_xor_success,
    xor_bound_check,
    xor_wrap,
)
from hardamp.predicate_single import planted_instance

from oracles import stat_distance


def position1_leak(n=6, k=3, seed=7):
    p, c1, _ = planted_instance(n, SeedPath(seed))
    acc = c1.accept_table
    fn = lambda xs, bs, r: uniform_from_u64(r) < acc[xs[0], bs[0]]
    return p, MultiMonitor(MultiDistinguisher(k, n, fn, name="leak1"))


def test_prefix_structure():
    t = Prefix(1)
    t2 = t.extend(5, 1).extend(3, 0)
    assert t2.i == 3 and t2.pairs == ((5, 1), (3, 0))
    assert t2.digest() == Prefix(3, ((5, 1), (3, 0))).digest()
    assert t2.digest() != Prefix(3, ((5, 1), (3, 1))).digest()
    with pytest.raises(ValueError):
        Prefix(2)
    with pytest.raises(ValueError):
        Prefix(0)


def test_multi_eval_counts_broadcast_size():
    ck = MultiDistinguisher(2, 4, lambda xs, bs, r: bs[0] ^ bs[1])
    out = ck.eval_many([np.int64(1), np.arange(5)], [np.uint8(1), np.zeros(5, np.uint8)], np.uint64(9))
    assert out.shape == (5,) and out.tolist() == [1] * 5
    assert ck.calls.value == 5
    with pytest.raises(ValueError):
        ck.eval_many([1], [1], 0)


def test_induced_distinguisher_recomputes_by_hand():
    p, ck = position1_leak(k=3)
    t = Prefix(1).extend(9, 1)
    c = InducedDistinguisher(ck, t, p)
    r = SeedPath(1).rng().integers(0, 1 << 64, size=50, dtype=np.uint64)
    got = c.eval_many(np.int64(4), np.uint8(0), r)
    x3 = (mix64_np(r, salt=3) & np.uint64(63)).astype(np.int64)
    inner = mix64_np(r, salt=0x5EED)
    want = ck.base._raw([np.int64(9), np.int64(4), x3], [np.uint8(1), np.uint8(0), p.table[x3]], inner)
    assert np.array_equal(got, want)
    assert c.calls is ck.calls
    assert c.suffix_calls.value == 50


def test_monitor_certificate_detects_prefix_change():
    p, ck = position1_leak()
    t = Prefix(2, ((3, 1),))
    c = InducedDistinguisher(ck, t, p)
    ck.clear()
    c.eval_many(np.int64(8), np.uint8(1), np.arange(10, dtype=np.uint64))
    assert ck.certify(2, t, 8)
    assert not ck.certify(2, t, 9)
    assert not ck.certify(2, Prefix(2, ((3, 0),)), 8)
    ck.clear()
    assert not ck.certify(2, t, 8)


@given(st.integers(0, 2**32))
def test_hybrid_endpoints(seed):
    p, ck = position1_leak(n=4, k=2)
    s = SeedPath(seed)
    never = lambda t, x, px: False
    always = lambda t, x, px: True
    assert hybrid(0, ck, None, p, s, contains=never) == experiment1(ck, p, s)
    assert hybrid_trace(2, ck, None, p, s, contains=never).as_dict()["bs"] == experiment1_trace(ck, p, s).as_dict()["bs"]
    o = experiment2(ck, None, p, s, contains=always)
    assert o.randomized_rounds == [1, 2]


def test_hybrid_index_validation():
    p, ck = position1_leak(n=4, k=2)
    with pytest.raises(ValueError):
        hybrid(3, ck, None, p, SeedPath(0), contains=lambda *a: False)


def test_hybrid_rounds_follow_the_rule():
    p, ck = position1_leak(n=4, k=3)
    inside = lambda t, x, px: x % 2 == 0
    for j in range(4):
        for s in range(20):
            o = hybrid_trace(j, ck, None, p, SeedPath(s), contains=inside)
            for i, (x, b) in enumerate(zip(o.xs, o.bs), 1):
                if i > j or x % 2:
                    assert b == p.table[x]
            assert all(i <= j and o.xs[i - 1] % 2 == 0 for i in o.randomized_rounds)


def test_set_generator_is_cached_and_seeded_by_prefix():
    p, ck = position1_leak()
    gs = PrefixSetGenerator(ck, p, 0.5, 1e-3, SeedPath(2))
    t = Prefix(1)
    a = gs(t)
    assert gs(t) is a
    gs2 = PrefixSetGenerator(ck, p, 0.5, 1e-3, SeedPath(2))
    assert gs2(t).delta == a.delta
    assert gs.inner_eps == Fraction(1, 24)
    assert 0 <= gs.density(t) <= 1


def test_gen_multi_extracts_predictor_for_position_leak():
    p, ck = position1_leak(n=6)
    q, delta = gen_multi(ck, p, 0.5, 1e-3, 3, SeedPath(3))
    succ = q.exact_success(p)
    assert succ >= 1 - Fraction(delta) / 2
    for x in (0, 17, 63):
        ck.clear()
        q.predict(x)
        assert q.coin or ck.certify(q.slot, q.prefix, x)


def test_gen_multi_validation():
    p, ck = position1_leak(n=4)
    with pytest.raises(ValueError):
        gen_multi(ck, p, 0.5, 1e-3, 2, SeedPath(0))
    with pytest.raises(ValueError):
        gen_multi(ck, p, 1.5, 1e-3, 3, SeedPath(0))


# [DERIVED] by enumeration of flip patterns: 1/2 + 0.6^3/2 = 0.608
def test_noisy_xor_success_matches_enumeration():
    for dp, k in ((Fraction(2, 5), 3), (Fraction(1, 3), 2), (Fraction(1, 2), 4)):
        f = dp / 2
        total = Fraction(0)
        for flips in itertools.product((0, 1), repeat=k):
            w = Fraction(1)
            for b in flips:
                w *= f if b else 1 - f
            total += w * (sum(flips) % 2 == 0)
        assert noisy_xor_success(dp, k) == total
    assert noisy_xor_success(0.4, 3) == Fraction(608, 1000)
    assert (1 - Fraction(2, 5)) ** 3 == Fraction(216, 1000)


def test_noisy_attacker_measured_near_exact():
    p = PredicateOracle.random(6, SeedPath(1))
    a = noisy_xor_attacker(p, 0.4, 3)
    rep = xor_bound_check(a, p, 3, 0.4, 0.02, SeedPath(2), half_width=0.01)
    assert rep["within_bound"]
    assert abs(rep["measured"]["value"] - 0.608) <= 0.01
    assert "extraction" not in rep


def test_xor_wrap_shares_counter():
    p = PredicateOracle.random(4, SeedPath(1))
    a, _ = backdoor_xor_attacker(p, 2, SeedPath(2), fraction=1.0)
    w = xor_wrap(a, 2)
    assert w.calls is a.calls
    xs = [np.arange(16), np.arange(16)[::-1]]
    bs = [p.table[xs[0]], p.table[xs[1]]]
    assert w.eval_many(xs, bs, np.uint64(5)).all()
    with pytest.raises(ValueError):
        xor_wrap(a, 3)


def _brute_extraction_distance(f, ptab, H, k, rows):
    """SD of (z_1..z_k, A b) from (z_1..z_k, uniform) for one matrix."""
    N = len(f)
    m = len(rows)
    joint, marg = {}, {}
    for xs in itertools.product(range(N), repeat=k):
        z = tuple(int(f[x]) for x in xs)
        px = Fraction(1, N**k)
        marg[z] = marg.get(z, 0) + px
        laws = [((0, Fraction(1, 2)), (1, Fraction(1, 2))) if H[x] else ((int(ptab[x]), Fraction(1)),) for x in xs]
        for combo in itertools.product(*laws):
            w = px
            bvec = 0
            for i, (bit, pr) in enumerate(combo):
                w *= pr
                bvec |= bit << i
            y = 0
            for r, row in enumerate(rows):
                y |= (bin(bvec & row).count("1") & 1) << r
            joint[(z, y)] = joint.get((z, y), 0) + w
    unif = {(z, y): pz / (1 << m) for z, pz in marg.items() for y in range(1 << m)}
    return stat_distance(joint, unif)


@settings(max_examples=10)
@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(0, 2), st.floats(0, 1))
def test_extraction_distance_matches_brute_force(seed, k, m, hfrac):
    n = 3
    N = 1 << n
    rng = SeedPath(seed).rng()
    ptab = rng.integers(0, 2, size=N).astype(np.uint8)
    f = np.where(rng.random(N) < 0.5, np.arange(N), N)
    H = rng.random(N) < hfrac
    src = PairSource(f, ptab)
    rep = extraction_experiment(src, k, 0.5, SeedPath(seed + 1), hard_set=H, out_bits=m)
    want = _brute_extraction_distance(f, ptab, H, k, rep["matrix_rows"])
    assert abs(rep["distance_recorded_matrix"] - float(want)) < 1e-12
    assert rep["distance_average"] <= rep["leftover_hash_bound"] + 1e-12


def test_extraction_extremes():
    N = 256
    p = PredicateOracle.random(8, SeedPath(9))
    src = PairSource(np.arange(N), p.table)
    full = extraction_experiment(src, 8, 0.5, SeedPath(5), hard_set=np.ones(N, bool), out_bits=1)
    # fresh coins everywhere: A b is uniform unless the row is zero
    assert full["distance_recorded_matrix"] == (0.5 if full["matrix_rows"] == [0] else 0.0)
    assert full["distance_average"] == pytest.approx(0.5 / 256)
    # everything revealed and no hard set: A b is determined by the view
    none = extraction_experiment(src, 4, 0.5, SeedPath(5), hard_set=np.zeros(N, bool), out_bits=4)
    assert none["distance_average"] == pytest.approx(1 - 1 / 16)


def test_extraction_validation():
    p = PredicateOracle.random(4, SeedPath(9))
    src = PairSource(np.arange(16), p.table)
    with pytest.raises(ValueError):
        extraction_experiment(src, 2, 0.5, SeedPath(0))
    with pytest.raises(ValueError):
        PairSource(np.arange(6), np.zeros(6))
