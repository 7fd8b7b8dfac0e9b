"""Acceptance criteria, one test each.  Every test prints a single
``PASS``/``FAIL`` line before asserting."""

import math
import time
from fractions import Fraction

import pytest

from hardamp import harness
from hardamp.combiners import build_amplifier, formula_accept_prob, gadget_map
from hardamp.core import SeedPath
from hardamp.predicate_single import gen_single, planted_instance, verify_theorem1

from oracles import brute_accept

ROOT = 20240501
N1, EPS1, ETA1, RUNS1 = 10, 0.1, 1e-3, 20


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  {name}  {detail}")
        return ok

    return emit


@pytest.fixture(scope="module")
def campaigns(tmp_path_factory):
    """Campaigns at the acceptance configurations, run once per module."""
    root = tmp_path_factory.mktemp("acceptance")
    cache = {}

    def get(experiment, **raw):
        key = (experiment, tuple(sorted(raw.items())))
        if key not in cache:
            cfg = harness.build_config(experiment, raw, seed=ROOT)
            t = time.perf_counter()
            recs, summary, files = harness.execute(cfg, 1)
            elapsed = time.perf_counter() - t
            d = harness.write_campaign(cfg, root, recs, summary, files)
            cache[key] = {"dir": d, "records": recs, "summary": summary, "seconds": elapsed}
        return cache[key]

    get.cache = cache
    return get


def verdicts(run):
    return {v["name"]: v for r in run["records"] for v in r["verdicts"] if r["label"] != "campaign"}


def by_label(run, label):
    (r,) = [r for r in run["records"] if r["label"] == label]
    return r


@pytest.fixture(scope="module")
def planted_suite():
    return [planted_instance(N1, SeedPath(ROOT).named("instance").child(i)) for i in range(RUNS1)]


def test_criterion_1_theorem1_suite(report, planted_suite):
    passes = {"large_set": 0, "indistinguishability": 0, "predictability": 0, "predictability_gain": 0}
    gain_runs = 0
    slowest = 0.0
    for i, (p, c, _) in enumerate(planted_suite):
        t = time.perf_counter()
        out = gen_single(c, p, EPS1, ETA1, SeedPath(ROOT).named("gen").child(i), strict_gain=True)
        rep = verify_theorem1(out, c, p, EPS1, require_gain=True)
        slowest = max(slowest, time.perf_counter() - t)
        for name, ok in rep.checks.items():
            passes[name] += ok
        gain_runs += "predictability_gain" in rep.checks
    need = math.ceil(0.95 * RUNS1)
    ok = all(passes[k] >= need for k in ("large_set", "indistinguishability", "predictability"))
    ok &= passes["predictability_gain"] >= math.ceil(0.95 * gain_runs)
    ok &= slowest <= 120
    detail = " ".join(f"{k}={v}/{gain_runs if k == 'predictability_gain' else RUNS1}" for k, v in passes.items())
    assert report("criterion 1: Theorem 1 suite n=10 eps=0.1", ok, f"{detail} slowest={slowest:.1f}s (need >= {need}/20, <= 120s)")


def _call_counts(planted_suite):
    q_calls, s_calls = [], []
    for i, (p, c, _) in enumerate(planted_suite):
        out = gen_single(c, p, EPS1, ETA1, SeedPath(ROOT).named("budget").child(i))
        x = int(SeedPath(ROOT).named("probe").child(i).stream().randbelow(1 << N1))
        c.calls.reset()
        out.q.predict(x)
        q_calls.append(c.calls.value)
        c.calls.reset()
        out.s.member(x, p.eval(x))
        s_calls.append(c.calls.value)
    return q_calls, s_calls


@pytest.fixture(scope="module")
def call_counts(planted_suite):
    return _call_counts(planted_suite)


def test_criterion_2a_predictor_call_budget(report, call_counts):
    q_calls, _ = call_counts
    bound = Fraction(200 * N1) / Fraction(EPS1).limit_denominator() ** 2
    ok = all(q <= bound for q in q_calls)
    assert report("criterion 2a: Q calls per prediction <= 200n/eps^2", ok, f"max={max(q_calls)} bound={float(bound):.0f}")


def test_criterion_2b_membership_call_budget(report, call_counts):
    # membership evaluates C' on both labels: 2m calls against a bound of m
    _, s_calls = call_counts
    bound = Fraction(100 * N1) / Fraction(EPS1).limit_denominator() ** 2
    ok = all(s <= bound for s in s_calls)
    assert report("criterion 2b: S calls per membership <= 100n/eps^2", ok, f"max={max(s_calls)} bound={float(bound):.0f}")


def test_criterion_3_theorem2_suite(report, campaigns):
    run = campaigns("multi", n=8, k=3)
    v = verdicts(run)
    eps = run["records"][0]["derived"]["estimate_half_width"] * 10
    est = by_label(run, "estimates")["estimates"]
    widths_ok = all(abs(e["half_width"] - eps / 10) < 1e-15 for e in est.values())
    large = by_label(run, "large-sets")["exact"]
    certs = by_label(run, "predictor")["certificates"]["non_rewinding"]
    ok = widths_ok and v["experiment_gap"]["passed"] and v["hybrid_telescoping"]["passed"]
    ok &= large["runs"] == 1000 and large["violations"] / 1000 <= eps
    ok &= all(certs) and v["predictor_success"]["passed"]
    detail = (
        f"gap={v['experiment_gap']['lhs']:.4f}<={eps} telescoping={v['hybrid_telescoping']['lhs']:.2e}<={v['hybrid_telescoping']['rhs']:.3f} "
        f"violations={large['violations']}/1000 certified={sum(certs)}/{len(certs)}"
    )
    assert report("criterion 3: Theorem 2 suite n=8 k=3", ok, detail)


def test_criterion_4_xor_bound(report, campaigns):
    run = campaigns("xor", delta_prime=0.4, k=3)
    v = verdicts(run)
    # optimal per-coordinate attacker: each bit right with prob 1 - 0.4/2
    exact = brute_accept(lambda u: 1 - (sum(u) & 1), 3, Fraction(1, 5))
    adv = Fraction(3, 5) ** 3
    eps_p = run["records"][0]["derived"]["bound"] - 0.5 - 0.216
    noisy = by_label(run, "noisy")
    ok = adv == Fraction(216, 1000) and exact == Fraction(1, 2) + adv / 2
    ok &= noisy["estimates"]["success"]["half_width"] <= 0.01
    ok &= v["noisy_within_bound"]["passed"] and abs(v["noisy_within_bound"]["rhs"] - (0.5 + 0.216 + eps_p)) < 1e-12
    ok &= v["backdoor_exceeds_bound"]["passed"] and "extracted_predictor" in v and v["extracted_predictor"]["passed"]
    ok &= v.get("extracted_predictor", {}).get("rhs", 0) >= 1 - 0.4 / 2 - 1e-12
    detail = (
        f"noisy={v['noisy_within_bound']['lhs']:.4f}<={v['noisy_within_bound']['rhs']:.3f} "
        f"backdoor={v['backdoor_exceeds_bound']['lhs']:.4f} extracted Pr[Q=P]={v.get('extracted_predictor', {}).get('lhs')}>=0.8"
    )
    assert report("criterion 4: XOR bound delta'=0.4 k=3", ok, detail)


def test_criterion_5_theorem3_suite(report, campaigns):
    run = campaigns("puzzle", answers=4, g="OR", k=3, eps=0.1, half_width=0.003)
    v = verdicts(run)
    solver = by_label(run, "solver")
    est = solver["estimates"]["d_success"]
    or3 = brute_accept(lambda u: int(any(u)), 3, Fraction(1, 4))
    and3 = brute_accept(lambda u: int(all(u)), 3, Fraction(1, 4))
    target = 0.25 + 0.1 / 18
    ok = or3 == Fraction(578125, 10**6) and and3 == Fraction(15625, 10**6)
    ok &= solver["exact"]["baseline"] == float(or3) and solver["exact"]["or3_and3"] == [float(or3), float(and3)]
    ok &= v["baseline_exact"]["passed"] and est["half_width"] <= 0.003 and est["value"] >= target
    ok &= v["parameter_accounting"]["passed"] and v["non_rewinding"]["passed"] and not solver["certificates"]["violations"]
    ok &= run["seconds"] <= 300
    detail = f"D={est['value']:.4f}>={target:.4f} +-{est['half_width']} trials={est['samples']} baseline={or3} AND3={and3} {run['seconds']:.0f}s"
    assert report("criterion 5: Theorem 3 suite OR3 delta=0.25", ok, detail)


def test_criterion_6_combiners(report, campaigns):
    run = campaigns("valiant", alpha=0.3, beta=0.5, n_target=10, spot_formulas=20)
    v = verdicts(run)
    f = build_amplifier(0.3, 0.5, 10)
    lo = formula_accept_prob(f, Fraction(3, 10))
    hi = formula_accept_prob(f, Fraction(1, 2))
    bound = Fraction(1, 1 << 10)
    pstar = (math.sqrt(5) - 1) / 2
    ok = isinstance(lo, Fraction) and lo < bound and hi > 1 - bound
    ok &= v["composition_matches_enumeration"]["passed"] and by_label(run, "spot-formulas")["exact"]["formulas"] == 20
    ok &= abs(gadget_map(pstar) - pstar) < 1e-12
    detail = f"k={f.k} log2 Pr[alpha]={run['records'][0]['exact']['log2_accept_alpha']:.1f} log2 (1-Pr[beta])={run['records'][0]['exact']['log2_reject_beta']:.1f} spot mismatches={by_label(run, 'spot-formulas')['exact']['mismatches']}"
    assert report("criterion 6: combiners", ok, detail)


def test_criterion_7_protocols(report, campaigns):
    run = campaigns("commit", alpha=0.3, beta=0.5, hiding_target=8, binding_target=10, decoder_runs=10000, binding_trials=100000)
    v = verdicts(run)
    dec = by_label(run, "decoder")["exact"]
    hid = by_label(run, "hiding")
    bnd = by_label(run, "binding")
    ok = dec["correct"] == dec["runs"] == 10000
    ok &= v["hiding_bound"]["passed"] and hid["exact"]["bound"] <= 0.5 + 2.0**-8 / 2
    ok &= bnd["exact"]["successes"] == 0 and bnd["estimates"]["double_open"]["samples"] == 100000 and v["binding_exact_bound"]["passed"]
    ok &= all(v[name]["passed"] for name in ("h_probability", "guess_given_h", "hiding_certificate"))
    detail = (
        f"decoder={dec['correct']}/{dec['runs']} hiding={hid['estimates']['guess']['value']:.4f}<={hid['exact']['bound']:.6f}+{hid['estimates']['guess']['half_width']:.4f} "
        f"binding={bnd['exact']['successes']}/100000 exact={bnd['exact']['bound']:.2e}"
    )
    assert report("criterion 7: protocols", ok, detail)


def test_criterion_8_extraction_lemma(report, campaigns):
    run = campaigns("extract", n=8, k=8)
    v = verdicts(run)
    ex = by_label(run, "extraction")["exact"]
    ok = v["distance_within_leftover_hash_bound"]["passed"]
    assert report("criterion 8: extraction demo n=8 k=8", ok, f"SD={ex['distance_average']:.4f} <= LHL {ex['leftover_hash_bound']:.4f}")


REPLAY_EXTRA = [("single", {"instances": 2, "n": 8}), ("reduce", {})]


def test_criterion_9_replay(report, campaigns):
    for experiment, raw in REPLAY_EXTRA:
        campaigns(experiment, **raw)
    lines, ok = [], True
    # every campaign of this module is replayed, passing or not
    for run in list(campaigns.cache.values()):
        for jobs in (1, 8):
            rep = harness.replay(run["dir"], jobs=jobs)
            ok &= rep["identical"]
            lines.append(f"{run['summary']['experiment']}@{jobs}={'same' if rep['identical'] else 'DIFF'}")
    ok &= len(lines) == 2 * len(harness.EXPERIMENTS)
    assert report("criterion 9: replay bit-identical under --jobs 1 and 8", ok, " ".join(lines))
