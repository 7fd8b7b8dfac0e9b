import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardamp.combiners import (
    AND,
    OR,
    P_STAR,
    AmplifierError,
    ReadOnceFormula,
    build_amplifier,
    certify,
    check_read_once,
    enumerate_accept_prob,
    formula_accept_bounds,
    formula_accept_prob,
    formula_eval,
    formula_eval_batch,
    from_nested,
    gadget_map,
    parse,
    serialize,
    to_nested,
    tower,
    valiant_gadget,
)
from hardamp.core import MonotoneFn, success_prob_exact

from oracles import nested_accept, nested_eval


@st.composite
def nested_formulas(draw, max_k=10):
    k = draw(st.integers(1, max_k))
    perm = draw(st.permutations(list(range(k))))
    nodes = list(perm)
    while len(nodes) > 1:
        i = draw(st.integers(0, len(nodes) - 2))
        op = draw(st.sampled_from([AND, OR]))
        nodes[i : i + 2] = [[op, nodes[i], nodes[i + 1]]]
    return nodes[0]


@given(nested_formulas())
def test_nested_roundtrip(obj):
    f = from_nested(obj)
    assert to_nested(f) == obj
    assert to_nested(parse(serialize(f))) == obj
    assert check_read_once(f)


@given(nested_formulas(), st.data())
def test_eval_matches_reference(obj, data):
    f = from_nested(obj)
    bits = data.draw(st.lists(st.integers(0, 1), min_size=f.k, max_size=f.k))
    assert formula_eval(f, bits) == nested_eval(obj, bits)


@given(nested_formulas(max_k=8), st.fractions(0, 1, max_denominator=50))
def test_exact_composition_matches_reference_enumeration(obj, p):
    f = from_nested(obj)
    assert formula_accept_prob(f, p) == nested_accept(obj, p)
    assert enumerate_accept_prob(f, p) == nested_accept(obj, p)


@given(nested_formulas(max_k=12), st.floats(0, 1))
def test_float_composition_close_to_exact(obj, p):
    f = from_nested(obj)
    assert abs(formula_accept_prob(f, p) - float(formula_accept_prob(f, Fraction(p)))) < 1e-12


@given(nested_formulas(max_k=12), st.fractions(0, 1, max_denominator=1000))
def test_interval_bounds_enclose_exact(obj, p):
    f = from_nested(obj)
    ex = formula_accept_prob(f, p)
    b = formula_accept_bounds(f, p)
    assert b["accept_lo"] <= ex <= b["accept_hi"]
    assert b["reject_lo"] <= 1 - ex <= b["reject_hi"]


@given(nested_formulas(max_k=10), st.fractions(0, 1, max_denominator=30), st.fractions(0, 1, max_denominator=30))
def test_acceptance_is_monotone_in_p(obj, p, q):
    f = from_nested(obj)
    lo, hi = sorted((p, q))
    assert formula_accept_prob(f, lo) <= formula_accept_prob(f, hi)


def test_batch_eval_shapes():
    f = from_nested([OR, [AND, 0, 1], 2])
    bits = np.array(list(itertools.product((0, 1), repeat=3)), dtype=np.uint8)
    out = formula_eval_batch(f, bits)
    assert out.tolist() == [nested_eval([OR, [AND, 0, 1], 2], list(b)) for b in bits]
    with pytest.raises(ValueError):
        formula_eval_batch(f, np.zeros((2, 4), dtype=np.uint8))


def test_from_nested_rejects_non_read_once():
    with pytest.raises(ValueError):
        from_nested([AND, 0, 0])
    with pytest.raises(ValueError):
        from_nested([AND, 0, 2])
    with pytest.raises(ValueError):
        from_nested(["XOR", 0, 1])
    with pytest.raises(ValueError):
        from_nested([AND, 0, True])


def test_monotone_fn_with_formula_uses_composition():
    f = from_nested([AND, 0, [OR, 1, 2]])
    g = MonotoneFn(3, formula=f)
    assert success_prob_exact(g, Fraction(1, 3)) == nested_accept([AND, 0, [OR, 1, 2]], Fraction(1, 3))


def test_gadget_fixed_point():
    assert abs(gadget_map(P_STAR) - P_STAR) < 1e-12
    g = ReadOnceFormula(valiant_gadget())
    assert g.k == 4
    for q in (0.1, 0.5, 0.9):
        assert abs(formula_accept_prob(g, q) - gadget_map(q)) < 1e-15


def test_gadget_pushes_away_from_fixed_point():
    assert gadget_map(P_STAR - 0.01) < P_STAR - 0.01
    assert gadget_map(P_STAR + 0.01) > P_STAR + 0.01


def test_tower_width_and_sharing():
    t = ReadOnceFormula(tower(AND, valiant_gadget(), 6))
    assert t.k == 24
    assert t.distinct_nodes() < 24
    assert formula_accept_prob(t, Fraction(1, 2)) == formula_accept_prob(ReadOnceFormula(valiant_gadget()), Fraction(1, 2)) ** 6
    with pytest.raises(ValueError):
        tower(OR, valiant_gadget(), 0)


def test_count_gates():
    f = from_nested([OR, [AND, 0, 1], [AND, 2, 3]])
    assert f.count_gates() == {AND: 2, OR: 1}


def test_build_amplifier_exact_certificate():
    f = build_amplifier(0.3, 0.5, 10)
    bound = Fraction(1, 1024)
    pa = formula_accept_prob(f, Fraction(3, 10))
    pb = formula_accept_prob(f, Fraction(1, 2))
    assert pa < bound and pb > 1 - bound
    assert f.info["certificate"] == "exact"
    assert certify(f, 0.3, 0.5, bound)["ok"]
    assert check_read_once(f)


@given(st.fractions(Fraction(1, 20), Fraction(7, 10), max_denominator=20), st.integers(1, 6))
def test_build_amplifier_property(alpha, n_target):
    beta = alpha + Fraction(1, 5)
    f = build_amplifier(alpha, beta, n_target, max_k=10**6)
    bound = Fraction(1, 1 << n_target)
    assert formula_accept_prob(f, alpha) < bound
    assert formula_accept_prob(f, beta) > 1 - bound


def test_build_amplifier_rejects_bad_parameters():
    with pytest.raises(AmplifierError):
        build_amplifier(0.5, 0.3, 4)
    with pytest.raises(AmplifierError):
        build_amplifier(0.3, 0.305, 4)
    with pytest.raises(AmplifierError):
        build_amplifier(0.49, 0.5, 10, max_k=1000)


def test_build_amplifier_degenerate_gap():
    f = build_amplifier(0, 1, 10)
    assert formula_accept_prob(f, 0) == 0 and formula_accept_prob(f, 1) == 1
