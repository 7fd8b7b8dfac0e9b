"""Campaign runner: flat key=value configs, line-delimited JSON records, a
regenerable summary, and replay.

A campaign lives in ``<out>/<experiment>-<digest>/`` with ``config.txt``,
``records.jsonl`` (one record per trial batch), ``summary.json`` and
``summary.tsv``.  Exit codes: 0 all verdicts pass, 2 configuration error
(nothing written), 3 some verdict failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import combiners, predicate_multi, predicate_single, protocols, puzzles
from .core import Estimate, MonotoneFn, PredicateOracle, SeedPath, chernoff_samples, estimate_probability, exact_fraction, parallel_map

EXPERIMENTS = ("single", "multi", "xor", "extract", "puzzle", "valiant", "commit", "reduce")
OUT_ENV = "ARTIFACT_OUT"
DEFAULT_OUT = "runs"
EXIT_OK, EXIT_CONFIG, EXIT_VERDICT = 0, 2, 3


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config


def _unit_open(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and 0 < v < 1


def _unit_closed(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and 0 <= v <= 1


def _int_in(lo, hi):
    return lambda v: isinstance(v, int) and not isinstance(v, bool) and lo <= v <= hi


def _one_of(*opts):
    return lambda v: v in opts


def _is_bool(v) -> bool:
    return isinstance(v, bool)


def _opt(check):
    return lambda v: v is None or check(v)


# key -> (default, validator, documented range)
SCHEMA: dict[str, dict[str, tuple]] = {
    "single": {
        "n": (10, _int_in(4, 12), "4..12"),
        "eps": (0.1, _unit_open, "(0,1)"),
        "instances": (20, _int_in(1, 10**4), "1..10000"),
        "distinguisher": ("planted", _one_of("planted", "constant"), "planted|constant"),
        "hidden_fraction": (0.5, _unit_closed, "[0,1]"),
        "strict_gain": (True, _is_bool, "bool"),
        "pass_fraction": (0.95, _unit_closed, "[0,1]"),
    },
    "multi": {
        "n": (8, _int_in(4, 12), "4..12"),
        "k": (3, _int_in(1, 8), "1..8"),
        "eps": (0.5, _unit_open, "(0,1)"),
        "leak": ("position1", _one_of("position1", "none"), "position1|none"),
        "exp2_runs": (1000, _int_in(1, 10**6), "1..1e6"),
    },
    "xor": {
        "n": (6, _int_in(4, 12), "4..12"),
        "k": (3, _int_in(1, 8), "1..8"),
        "delta_prime": (0.4, _unit_open, "(0,1)"),
        "eps": (0.02, _unit_open, "(0,1)"),
        "half_width": (0.01, _unit_open, "(0,1)"),
        "backdoor_fraction": (0.875, _unit_closed, "[0,1]"),
        "gen_eps": (0.9, _unit_open, "(0,1)"),
    },
    "extract": {
        "n": (8, _int_in(2, 10), "2..10"),
        "k": (8, _int_in(1, 8), "1..8"),
        "delta_prime": (0.5, _unit_open, "(0,1)"),
        "reveal": (0.5, _unit_closed, "[0,1]"),
        "out_bits": (None, _opt(_int_in(0, 8)), "null|0..8"),
    },
    "puzzle": {
        "answers": (4, _int_in(2, 1 << 16), "2..65536"),
        "leak": (0.09, _unit_closed, "[0,1]"),
        "g": ("OR", _one_of("OR", "AND"), "OR|AND"),
        "k": (3, _int_in(2, 8), "2..8"),
        "eps": (0.1, _unit_open, "(0,1)"),
        "n": (16, _int_in(2, 63), "2..63"),
        "half_width": (0.003, _unit_open, "(0,1)"),
    },
    "valiant": {
        "alpha": (0.3, _unit_closed, "[0,1)"),
        "beta": (0.5, _unit_closed, "(alpha,1]"),
        "n_target": (10, _int_in(1, 64), "1..64"),
        "spot_formulas": (20, _int_in(0, 1000), "0..1000"),
    },
    "commit": {
        "alpha": (0.3, _unit_closed, "[0,1)"),
        "beta": (0.5, _unit_open, "(0,1)"),
        "hiding_target": (8, _int_in(1, 30), "1..30"),
        "binding_target": (10, _int_in(1, 30), "1..30"),
        "hiding_trials": (20000, _int_in(1, 10**8), "1..1e8"),
        "binding_trials": (100000, _int_in(1, 10**8), "1..1e8"),
        "decoder_runs": (10000, _int_in(1, 10**8), "1..1e8"),
    },
    "reduce": {
        "n": (6, _int_in(4, 10), "4..10"),
        "k": (3, _one_of(3), "3"),
        "reveal": (0.6, _unit_closed, "[0,1]"),
        "eps": (0.9, _unit_open, "(0,1)"),
        "claimed_delta": (0.8, _unit_open, "(0,1)"),
        "adversary": ("posterior", _one_of("posterior", "coin"), "posterior|coin"),
    },
}
COMMON = {
    "seed": (0, _int_in(0, (1 << 64) - 1), "0..2^64-1"),
    "eta": (1e-3, _unit_open, "(0,1)"),
}


@dataclass
class CampaignConfig:
    experiment: str
    params: dict
    seed: int = 0
    eta: float = 1e-3

    def to_text(self) -> str:
        lines = [f"experiment = {json.dumps(self.experiment)}", f"seed = {json.dumps(self.seed)}", f"eta = {json.dumps(self.eta)}"]
        lines += [f"{k} = {json.dumps(self.params[k])}" for k in sorted(self.params)]
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def as_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "eta": self.eta, **self.params}


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; values are JSON, bare words are strings; ``#``
    starts a comment line."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, val = (s.strip() for s in line.partition("="))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def build_config(experiment: str, raw: dict, seed=None, eta=None) -> CampaignConfig:
    if experiment not in SCHEMA:
        raise ConfigError(f"unknown experiment {experiment!r}")
    raw = dict(raw)
    named = raw.pop("experiment", experiment)
    if named != experiment:
        raise ConfigError(f"config names experiment {named!r}, command is {experiment!r}")
    schema = SCHEMA[experiment]
    unknown = sorted(set(raw) - set(schema) - set(COMMON))
    if unknown:
        raise ConfigError(f"unknown keys for {experiment}: {', '.join(unknown)}")
    if seed is not None:
        raw["seed"] = seed
    if eta is not None:
        raw["eta"] = eta
    vals = {}
    for key, (default, check, rng) in (schema | COMMON).items():
        v = raw.get(key, default)
        if isinstance(v, float) and v.is_integer() and isinstance(default, int) and not isinstance(default, bool):
            v = int(v)
        if not check(v):
            raise ConfigError(f"{key} = {v!r} is outside its range {rng}")
        vals[key] = v
    if experiment == "valiant" and not vals["alpha"] < vals["beta"]:
        raise ConfigError("need alpha < beta")
    if experiment == "commit" and not vals["alpha"] < 1:
        raise ConfigError("alpha must be < 1")
    seed_v, eta_v = vals.pop("seed"), vals.pop("eta")
    return CampaignConfig(experiment, vals, seed_v, float(eta_v))


# ----------------------------------------------------------------- records


@dataclass
class Verdict:
    name: str
    inequality: str
    lhs: object
    rhs: object
    passed: bool

    def as_dict(self) -> dict:
        return {"name": self.name, "inequality": self.inequality, "lhs": _jsonable(self.lhs), "rhs": _jsonable(self.rhs), "passed": bool(self.passed)}


def check(name: str, lhs, op: str, rhs) -> Verdict:
    ops = {"<=": lambda a, b: a <= b, "<": lambda a, b: a < b, ">=": lambda a, b: a >= b, ">": lambda a, b: a > b, "==": lambda a, b: a == b}
    return Verdict(name, f"{name}: lhs {op} rhs", lhs, rhs, bool(ops[op](lhs, rhs)))


@dataclass
class Batch:
    label: str
    estimates: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    oracle_calls: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)


def _jsonable(v):
    if isinstance(v, Estimate):
        return v.as_dict()
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def make_record(cfg: CampaignConfig, index: int, b: Batch, derived: dict) -> dict:
    return {
        "experiment": cfg.experiment,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config_digest": cfg.digest,
        "seed": cfg.seed,
        "batch": index,
        "label": b.label,
        "estimates": _jsonable(b.estimates),
        "exact": _jsonable(b.exact),
        "verdicts": [v.as_dict() for v in b.verdicts],
        "oracle_calls": _jsonable(b.oracle_calls),
        "certificates": _jsonable(b.certificates),
        "derived": _jsonable(derived),
        "details": _jsonable(b.details),
    }


def summarize(records: list[dict]) -> dict:
    """Summary computed from the raw records alone."""
    if not records:
        raise ValueError("no records")
    first = records[0]
    final = [r for r in records if r["label"] == "campaign"]
    per_batch = [v for r in records if r["label"] != "campaign" for v in r["verdicts"]]
    if final:
        verdicts = final[-1]["verdicts"]
    else:
        verdicts = per_batch
    tally: dict[str, list[int]] = {}
    for v in per_batch:
        t = tally.setdefault(v["name"], [0, 0])
        t[0] += int(v["passed"])
        t[1] += 1
    return {
        "experiment": first["experiment"],
        "config_digest": first["config_digest"],
        "seed": first["seed"],
        "batches": len(records),
        "derived": first["derived"],
        "batch_verdicts": {k: {"passed": a, "total": b} for k, (a, b) in sorted(tally.items())},
        "verdicts": verdicts,
        "passed": all(v["passed"] for v in verdicts),
    }


def _summary_tsv(summary: dict) -> str:
    rows = ["name\tinequality\tlhs\trhs\tpassed"]
    for v in summary["verdicts"]:
        rows.append("\t".join([v["name"], v["inequality"], json.dumps(v["lhs"]), json.dumps(v["rhs"]), str(v["passed"]).lower()]))
    return "\n".join(rows) + "\n"


# ------------------------------------------------------------- experiments

RUNNERS: dict[str, Callable] = {}


def runner(name):
    def deco(fn):
        RUNNERS[name] = fn
        return fn

    return deco


def _constant_distinguisher(n: int):
    return predicate_single.Distinguisher(n, lambda x, b, r: np.ones(np.broadcast_shapes(np.shape(x), np.shape(b), np.shape(r)), np.uint8), name="constant", accept_table=np.ones((1 << n, 2)))


@runner("single")
def run_single(cfg: CampaignConfig, seeds: SeedPath, jobs: int):
    P = cfg.params
    n, eps = P["n"], P["eps"]
    fe = exact_fraction(eps)
    q_bound = 200 * n / fe**2
    s_bound = 100 * n / fe**2
    derived = {
        "fixed_randomness_size": predicate_single.FixedRandomnessDistinguisher.size_for(n, eps),
        "candidate_budget": math.ceil(Fraction(50 * n) / fe),
        "density_half_width": eps / 1000,
        "prefix_half_width": eps / 100,
        "q_call_bound": float(q_bound),
        "s_call_bound": float(s_bound),
    }

    def one(i: int) -> Batch:
        inst = seeds.named("instance").child(i)
        if P["distinguisher"] == "planted":
            p, c, _ = predicate_single.planted_instance(n, inst, P["hidden_fraction"])
        else:
            p = PredicateOracle.random(n, inst)
            c = _constant_distinguisher(n)
        b = Batch(f"instance-{i}")
        try:
            out = predicate_single.gen_single(c, p, eps, cfg.eta, seeds.named("gen").child(i), strict_gain=P["strict_gain"])
        except predicate_single.GenError as e:
            b.verdicts.append(Verdict("generator_completed", "generator_completed: finished within budget", str(e), True, False))
            b.details["error"] = e.diagnostics
            return b
        gen_calls = c.calls.value
        rep = predicate_single.verify_theorem1(out, c, p, eps)
        b.exact.update(mu_s=rep.mu_s, indist_gap=rep.indist_gap, q_success=rep.q_success, delta=out.delta)
        b.verdicts += [
            check("large_set", rep.mu_s, ">=", exact_fraction(out.delta)),
            check("indistinguishability", rep.indist_gap, "<=", fe),
            check("predictability", rep.q_success, ">=", 1 - exact_fraction(out.delta) / 2),
        ]
        if P["strict_gain"] and out.delta < 1:
            b.verdicts.append(check("predictability_gain", rep.q_success, ">=", 1 - exact_fraction(out.delta) / 2 + fe / 4))
        x = int(inst.named("probe").stream().randbelow(1 << n))
        c.calls.reset()
        out.q.predict(x)
        q_calls = c.calls.value
        c.calls.reset()
        out.s.member(x, p.eval(x))
        s_calls = c.calls.value
        b.verdicts += [check("q_call_budget", q_calls, "<=", q_bound), check("s_call_budget", s_calls, "<=", s_bound)]
        b.oracle_calls = {"generator": gen_calls, "q_per_prediction": q_calls, "s_per_membership": s_calls}
        b.details = {"diagnostics": out.diagnostics}
        return b

    batches = parallel_map(one, range(P["instances"]), jobs)
    final = []
    names = ["large_set", "indistinguishability", "predictability", "predictability_gain"]
    for name in names:
        vs = [v for bt in batches for v in bt.verdicts if v.name == name]
        if name == "predictability_gain" and not vs:
            continue
        ok = sum(v.passed for v in vs)
        total = P["instances"] if name != "predictability_gain" else len(vs)
        final.append(Verdict(f"{name}_rate", f"{name}_rate: passes >= ceil(pass_fraction * runs)", ok, math.ceil(P["pass_fraction"] * total - 1e-9), ok >= math.ceil(P["pass_fraction"] * total - 1e-9)))
    for name in ("q_call_budget", "s_call_budget", "generator_completed"):
        vs = [v for bt in batches for v in bt.verdicts if v.name == name]
        if vs:
            ok = sum(v.passed for v in vs)
            final.append(Verdict(f"{name}_all", f"{name}_all: passes == runs", ok, len(vs), ok == len(vs)))
    return batches, final, derived


def _planted_multi(n: int, k: int, leak: str, seeds: SeedPath):
    p, c1, _ = predicate_single.planted_instance(n, seeds)
    acc = c1.accept_table
    if leak == "position1":

        def fn(xs, bs, r):
            return predicate_multi.uniform_from_u64(r) < acc[xs[0], bs[0]]

    else:

        def fn(xs, bs, r):
            return (r >> np.uint64(63)).astype(np.uint8)

    return p, predicate_multi.MultiMonitor(predicate_multi.MultiDistinguisher(k, n, fn, name=f"leak-{leak}"))


@runner("multi")
def run_multi(cfg: CampaignConfig, seeds: SeedPath, jobs: int):
    P = cfg.params
    n, k, eps, eta = P["n"], P["k"], P["eps"], cfg.eta
    p, ck = _planted_multi(n, k, P["leak"], seeds.named("instance"))
    gs = predicate_multi.PrefixSetGenerator(ck, p, eps, eta, seeds.named("sets"))
    derived = {
        "iterations": math.ceil(Fraction(n * k) / exact_fraction(eps)),
        "inner_eps": float(exact_fraction(eps) / (4 * k)),
        "estimate_half_width": eps / 10,
        "estimate_samples": chernoff_samples(eps / 10, eta),
        "fixed_randomness_size_inner": predicate_single.FixedRandomnessDistinguisher.size_for(n, gs.inner_eps),
    }
    batches = []

    gen = Batch("predictor")
    q, delta = predicate_multi.gen_multi(ck, p, eps, eta, k, seeds.named("search"), gs=gs)
    succ = q.exact_success(p)
    certs = []
    for x in seeds.named("certify").rng().integers(0, 1 << n, size=3):
        ck.clear()
        q.predict(int(x))
        certs.append(True if q.coin else ck.certify(q.slot, q.prefix, int(x)))
    gen.exact = {"delta": delta, "q_success": succ}
    gen.verdicts = [check("predictor_success", succ, ">=", 1 - exact_fraction(delta) / 2)]
    gen.certificates = {"non_rewinding": certs}
    gen.verdicts.append(check("non_rewinding_rate", sum(certs), "==", len(certs)))
    gen.details = {"predictor": q.describe()}
    batches.append(gen)

    def est(label, fn):
        return estimate_probability(fn, eps / 10, eta, seeds.named("estimate").named(label))

    names = ["exp1", "exp2"] + [f"hybrid{j}" for j in range(k + 1)]
    fns = [lambda s: predicate_multi.experiment1(ck, p, s), lambda s: predicate_multi.experiment2(ck, gs, p, s).output]
    fns += [(lambda j: lambda s: predicate_multi.hybrid(j, ck, gs, p, s))(j) for j in range(k + 1)]
    ests = dict(zip(names, parallel_map(lambda a: est(*a), list(zip(names, fns)), jobs)))
    eb = Batch("estimates", estimates=ests)
    e1, e2, h0, hk = ests["exp1"], ests["exp2"], ests["hybrid0"], ests[f"hybrid{k}"]
    steps = [ests[f"hybrid{j}"].value - ests[f"hybrid{j + 1}"].value for j in range(k)]
    eb.verdicts = [
        check("experiment_gap", abs(e1.value - e2.value), "<=", eps),
        check("hybrid_telescoping", abs(math.fsum(steps) - (e1.value - e2.value)), "<=", e1.half_width + e2.half_width + h0.half_width + hk.half_width),
    ]
    eb.details = {"hybrid_steps": steps}
    batches.append(eb)

    viol = 0
    for j in range(P["exp2_runs"]):
        o = predicate_multi.experiment2(ck, gs, p, seeds.named("large-sets").child(j))
        t = predicate_multi.Prefix(1)
        bad = False
        for i in range(k):
            if gs.density(t) < gs(t).delta - 1e-12:
                bad = True
            if i < k - 1:
                t = t.extend(o.xs[i], o.bs[i])
        viol += bad
    lb = Batch("large-sets", exact={"violations": viol, "runs": P["exp2_runs"]})
    lb.verdicts = [check("large_set_violation_rate", viol / P["exp2_runs"], "<=", eps)]
    lb.details = {"prefixes_generated": gs.prefixes_seen}
    batches.append(lb)
    final = [v for b in batches for v in b.verdicts]
    return batches, final, derived


@runner("xor")
def run_xor(cfg: CampaignConfig, seeds: SeedPath, jobs: int):
    P = cfg.params
    n, k, dp = P["n"], P["k"], P["delta_prime"]
    p = PredicateOracle.random(n, seeds.named("predicate"))
    derived = {"xor_advantage": (1 - dp) ** k, "bound": 0.5 + (1 - dp) ** k + P["eps"], "half_width": P["half_width"]}
    noisy = predicate_multi.noisy_xor_attacker(p, dp, k)
    rep = predicate_multi.xor_bound_check(noisy, p, k, dp, P["eps"], seeds.named("noisy"), cfg.eta, P["half_width"], P["gen_eps"])
    b1 = Batch("noisy", estimates={"success": Estimate(**rep["measured"])}, exact={"success": predicate_multi.noisy_xor_success(dp, k)})
    b1.verdicts = [check("noisy_within_bound", rep["measured"]["value"], "<=", rep["bound"])]
    b1.oracle_calls = {"attacker": noisy.calls.value}
    bd, mask = predicate_multi.backdoor_xor_attacker(p, k, seeds.named("backdoor"), P["backdoor_fraction"])
    rep2 = predicate_multi.xor_bound_check(bd, p, k, dp, P["eps"], seeds.named("backdoored"), cfg.eta, P["half_width"], P["gen_eps"])
    b2 = Batch("backdoor", estimates={"success": Estimate(**rep2["measured"])}, exact={"backdoor_fraction": float(mask.mean())})
    b2.verdicts = [check("backdoor_exceeds_bound", rep2["measured"]["value"], ">", rep2["bound"])]
    if "extraction" in rep2:
        ex = rep2["extraction"]
        b2.exact["q_success"] = ex["exact_success"]
        b2.verdicts.append(Verdict("extracted_predictor", "extracted_predictor: lhs >= rhs", ex["exact_success"], ex["target"], bool(ex["beats_target"])))
        b2.details = {"extraction": ex}
    b2.oracle_calls = {"attacker": bd.calls.value}
    batches = [b1, b2]
    return batches, [v for b in batches for v in b.verdicts], derived


@runner("extract")
def run_extract(cfg: CampaignConfig, seeds: SeedPath, jobs: int):
    P = cfg.params
    n, k = P["n"], P["k"]
    N = 1 << n
    p = PredicateOracle.random(n, seeds.named("predicate"))
    rng = seeds.named("source").rng()
    shown = np.zeros(N, dtype=bool)
    shown[rng.permutation(N)[: int(round(P["reveal"] * N))]] = True
    f = np.where(shown, np.arange(N), N)
    hard = np.zeros(N, dtype=bool)
    hard[rng.permutation(N)[: int(round(P["delta_prime"] * N))]] = True
    src = predicate_multi.PairSource(f, p.table)
    rep = predicate_multi.extraction_experiment(src, k, P["delta_prime"], seeds.named("extract"), hard_set=hard, out_bits=P["out_bits"])
    b = Batch("extraction", exact={k2: rep[k2] for k2 in ("distance_average", "distance_recorded_matrix", "leftover_hash_bound", "hard_set_density")})
    b.verdicts = [check("distance_within_leftover_hash_bound", rep["distance_average"], "<=", rep["leftover_hash_bound"] + 1e-12)]
    b.details = rep
    derived = {"out_bits": rep["out_bits"], "landing_threshold": rep["landing_threshold"]}
    return [b], list(b.verdicts), derived


@runner("puzzle")
def run_puzzle(cfg: CampaignConfig, seeds: SeedPath, jobs: int):
    P = cfg.params
    k, eps = P["k"], exact_fraction(P["eps"])
    g = MonotoneFn.OR(k) if P["g"] == "OR" else MonotoneFn.AND(k)
    base = puzzles.GuessingPuzzle(P["answers"], P["leak"], P["n"])
    delta = Fraction(1, P["answers"])
    enum = sum((Fraction(int(c)) * math.prod(delta if (x >> i) & 1 else 1 - delta for i in range(k)) for x, c in enumerate(g.truth_table())), Fraction(0))
    exact_base = puzzles.success_prob_exact(g, delta)
    derived = {
        "delta": delta,
        "baseline": exact_base,
        "target": delta + eps / (6 * k),
        "candidate_count_top": puzzles.candidate_count(k, eps, P["n"]),
        "retry_budget_top": puzzles.retry_budget(k, eps),
    }
    solver = puzzles.HintSolver(P["answers"])
    d = puzzles.gen_puzzle_solver(solver, base, g, eps, delta, P["n"], cfg.eta, seeds.named("gen"))
    est = puzzles.measure_success(d, base, P["half_width"], cfg.eta, seeds.named("measure"))
    cert = puzzles.check_non_rewinding(d)
    b = Batch("solver", estimates={"d_success": est}, exact={"baseline": exact_base, "baseline_enumerated": enum, "or3_and3": [puzzles.success_prob_exact(MonotoneFn.OR(3), Fraction(1, 4)), puzzles.success_prob_exact(MonotoneFn.AND(3), Fraction(1, 4))]})
    b.verdicts = [
        check("baseline_exact", exact_base, "==", enum),
        check("solver_success", est.value, ">=", float(delta + eps / (6 * k))),
        check("non_rewinding", int(cert["non_rewinding"]), "==", 1),
    ]
    # parameter accounting replayed from the generator's own level records
    acc_ok, cur = True, eps
    expect, seen = [], []
    for lvl in d.diagnostics["levels"]:
        kk = lvl["k"]
        want = {"eps": float(cur), "candidates_budget": puzzles.candidate_count(kk, cur, P["n"]), "threshold": float((1 - Fraction(3, 4 * kk)) * cur)}
        if lvl["branch"] == "retry":
            want["retry_budget"] = puzzles.retry_budget(kk, cur)
        expect.append(want)
        seen.append({key: lvl.get(key) for key in want})
        acc_ok &= all(lvl.get(key) == val for key, val in want.items())
        cur = (1 - Fraction(1, kk)) * cur
    b.verdicts.append(Verdict("parameter_accounting", "parameter_accounting: recorded == recomputed", seen, expect, acc_ok))
    b.oracle_calls = {"solver_steps": solver.calls.value if hasattr(solver, "calls") else None, "live_reads": sum(cert["live_reads"])}
    b.certificates = {k2: cert[k2] for k2 in ("solves", "slot", "retry_budget", "violations", "non_rewinding")}
    b.details = {"mode": d.mode, "fixed_prefix": list(d.fixed_prefix), "diagnostics": d.diagnostics}
    return [b], list(b.verdicts), derived


@runner("valiant")
def run_valiant(cfg: CampaignConfig, seeds: SeedPath, jobs: int):
    P = cfg.params
    f = combiners.build_amplifier(P["alpha"], P["beta"], P["n_target"])
    bound = Fraction(1, 1 << P["n_target"])
    pa, pb = f.info["accept_alpha"], f.info["accept_beta"]
    text = combiners.serialize(f)
    pstar = (math.sqrt(5) - 1) / 2
    b = Batch("amplifier", exact={"k": f.k, "accept_alpha": pa, "accept_beta": pb, "log2_accept_alpha": _log2(pa), "log2_reject_beta": _log2(1 - pb)})
    b.verdicts = [
        Verdict("accept_alpha_below", "accept_alpha_below: lhs < 2^-n_target (exact)", float(pa), float(bound), pa < bound),
        Verdict("accept_beta_above", "accept_beta_above: lhs > 1 - 2^-n_target (exact)", float(pb), float(1 - bound), pb > 1 - bound),
        check("gadget_fixed_point", abs(combiners.gadget_map(pstar) - pstar), "<", 1e-12),
    ]
    b.details = {"formula_sha256": hashlib.sha256(text.encode()).hexdigest(), "formula_chars": len(text), "info": {k: v for k, v in f.info.items() if k not in ("accept_alpha", "accept_beta")}}
    spot = Batch("spot-formulas")
    rng = seeds.named("spot").rng()
    mism = 0
    for i in range(P["spot_formulas"]):
        sf = _random_formula(int(rng.integers(1, 21)), rng)
        q = Fraction(int(rng.integers(0, 1025)), 1024)
        mism += combiners.formula_accept_prob(sf, q) != combiners.enumerate_accept_prob(sf, q)
    spot.exact = {"mismatches": mism, "formulas": P["spot_formulas"]}
    spot.verdicts = [check("composition_matches_enumeration", mism, "==", 0)]
    derived = {"k": f.k, "bound": bound, "accept_alpha": pa, "accept_beta": pb, "log2_accept_alpha": _log2(pa), "log2_reject_beta": _log2(1 - pb)}
    return [b, spot], b.verdicts + spot.verdicts, derived | {"formula_text": text}


def _log2(v) -> float:
    v = Fraction(v)
    if v <= 0:
        return float("-inf")
    return math.log2(v.numerator) - math.log2(v.denominator)


def _random_formula(k: int, rng) -> combiners.ReadOnceFormula:
    nodes = [int(v) for v in rng.permutation(k)]
    while len(nodes) > 1:
        i = int(rng.integers(0, len(nodes) - 1))
        op = "AND" if rng.integers(0, 2) else "OR"
        nodes[i : i + 2] = [[op, nodes[i], nodes[i + 1]]]
    return combiners.from_nested(nodes[0])


@runner("commit")
def run_commit(cfg: CampaignConfig, seeds: SeedPath, jobs: int):
    P = cfg.params
    batches = []
    weak = protocols.WeakCommitment(P["alpha"], P["beta"])
    src = protocols.HidingSource.from_beta(P["beta"])
    beta = exact_fraction(P["beta"])
    hb = Batch("h-variable", exact={"pr_h1": src.pr_h1(), "best_success": src.best_success(), "guesses_given_h1": sorted(src.all_guesses_given_h1())})
    hb.verdicts = [
        check("h_probability", abs(float(src.pr_h1() - beta)), "<=", 1e-12),
        check("guess_given_h", max(abs(float(v - Fraction(1, 2))) for v in src.all_guesses_given_h1()), "<=", 1e-12),
        check("hiding_certificate", abs(float(src.best_success() - (1 - beta / 2))), "<=", 1e-12),
    ]
    batches.append(hb)

    amp_h = combiners.build_amplifier(P["alpha"], P["beta"], P["hiding_target"])
    rng = seeds.named("decoder").rng()
    kd = 8
    gd = _random_formula(kd, rng)
    c = rng.integers(0, 2, size=(P["decoder_runs"], kd)).astype(np.uint8)
    bits = rng.integers(0, 2, size=P["decoder_runs"]).astype(np.uint8)
    r = rng.integers(0, 1 << 64, size=P["decoder_runs"], dtype=np.uint64)
    masks, final, _ = protocols.extraction_batch(gd, c, bits, r, keep_wires=False)
    ok = int((protocols.decode_with_inputs(gd, c, masks, final) == bits).sum())
    db = Batch("decoder", exact={"correct": ok, "runs": P["decoder_runs"]})
    db.verdicts = [check("decoder_correct", ok, "==", P["decoder_runs"])]
    db.details = {"formula": combiners.to_nested(gd)}
    batches.append(db)

    hid = protocols.hiding_experiment(amp_h, src, P["hiding_trials"], seeds.named("hiding"), cfg.eta)
    hs = Batch("hiding", estimates={"guess": Estimate(hid["measured"], hid["half_width"], 1 - cfg.eta, hid["trials"])}, exact={"bound": hid["bound"], "k": hid["k"]})
    hs.verdicts = [check("hiding_bound", hid["measured"], "<=", hid["bound"] + hid["half_width"])]
    batches.append(hs)

    amp_b = combiners.build_amplifier(P["alpha"], P["beta"], P["binding_target"])
    bnd = protocols.binding_experiment(amp_b, weak, P["binding_trials"], seeds.named("binding"), cfg.eta)
    bs = Batch("binding", estimates={"double_open": Estimate(bnd["measured"], bnd["half_width"], 1 - cfg.eta, bnd["trials"])}, exact={"bound": bnd["exact"], "successes": bnd["successes"], "k": bnd["k"]})
    bs.verdicts = [
        check("binding_exact_bound", bnd["exact"], "<", 2.0 ** -P["binding_target"]),
        check("binding_measured", bnd["measured"], "<=", bnd["exact"] + bnd["half_width"]),
    ]
    batches.append(bs)
    derived = {"hiding_k": amp_h.k, "binding_k": amp_b.k, "hiding_bound": 0.5 + 2.0 ** -P["hiding_target"] / 2}
    return batches, [v for b in batches for v in b.verdicts], derived


def _coin_adversary(z, masks, final):
    return np.zeros(len(final), dtype=np.uint8)


@runner("reduce")
def run_reduce(cfg: CampaignConfig, seeds: SeedPath, jobs: int):
    P = cfg.params
    ws = protocols.planted_reveal_source(P["n"], P["reveal"], seeds.named("source"))
    adversary = _coin_adversary if P["adversary"] == "coin" else None
    rep = protocols.protocol_reduction_demo(ws, adversary, P["k"], P["eps"], seeds.named("reduce"), claimed_delta=P["claimed_delta"], eta=cfg.eta)
    b = Batch("reduction", estimates={"adversary": Estimate(**rep["adversary_success"])}, exact={"eta_k": rep["eta_k"], "true_delta": rep["true_delta"]})
    ex = rep.get("extraction")
    if ex is not None:
        b.exact.update(delta=ex["delta"], q_success=ex["exact_success"])
        b.verdicts = [
            Verdict("predictor_success", "predictor_success: lhs >= 1 - delta/2", ex["exact_success"], 1 - ex["delta"] / 2, ex["beats_one_minus_half_delta"]),
            Verdict("non_rewinding", "non_rewinding: all certified", ex["certified_predictions"], ex["certified_predictions"], ex["non_rewinding"]),
        ]
        b.certificates = {"non_rewinding": ex["non_rewinding"], "predictions": ex["certified_predictions"]}
    else:
        b.verdicts = [Verdict("no_obligation", "no_obligation: adversary <= 1/2 + eta_k", rep["adversary_success"]["value"], rep["threshold"], True)]
    b.details = rep
    derived = {"threshold": rep["threshold"], "iterations": math.ceil(Fraction(P["n"] * P["k"]) / exact_fraction(P["eps"]))}
    return [b], list(b.verdicts), derived


# --------------------------------------------------------------- campaigns


def execute(cfg: CampaignConfig, jobs: int = 1) -> tuple[list[dict], dict, dict]:
    """Run a campaign in memory: (records, summary, extra files)."""
    seeds = SeedPath(cfg.seed, (hashlib.sha256(cfg.experiment.encode()).digest()[0],))
    batches, final, derived = RUNNERS[cfg.experiment](cfg, seeds, jobs)
    files = {}
    if "formula_text" in derived:
        files["formula.txt"] = derived.pop("formula_text") + "\n"
    records = [make_record(cfg, i, b, derived) for i, b in enumerate(batches)]
    records.append(make_record(cfg, len(batches), Batch("campaign", verdicts=final), derived))
    return records, summarize(records), files


def write_campaign(cfg: CampaignConfig, out_root: Path, records, summary, files) -> Path:
    out_root.mkdir(parents=True, exist_ok=True)
    final = out_root / f"{cfg.experiment}-{cfg.digest}"
    tmp = Path(tempfile.mkdtemp(dir=out_root, prefix=".tmp-"))
    (tmp / "config.txt").write_text(cfg.to_text())
    with open(tmp / "records.jsonl", "a") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    (tmp / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (tmp / "summary.tsv").write_text(_summary_tsv(summary))
    for name, text in files.items():
        (tmp / name).write_text(text)
    if final.exists():
        shutil.rmtree(final)
    tmp.rename(final)
    return final


def run_campaign(cfg: CampaignConfig, out_root: Path | None = None, jobs: int = 1) -> tuple[dict, Path]:
    """Run and persist a campaign; returns (campaign record, run directory)."""
    out_root = Path(out_root) if out_root is not None else Path(os.environ.get(OUT_ENV, DEFAULT_OUT))
    records, summary, files = execute(cfg, jobs)
    return records[-1], write_campaign(cfg, out_root, records, summary, files)


def read_records(path: Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _strip(r: dict) -> dict:
    return {k: v for k, v in r.items() if k != "timestamp"}


def replay(run_dir: Path, seed=None, jobs: int = 1) -> dict:
    """Re-run the campaign recorded in ``run_dir`` and compare every record
    field except the timestamp."""
    run_dir = Path(run_dir)
    if run_dir.name == "records.jsonl":
        run_dir = run_dir.parent
    raw = parse_config_text((run_dir / "config.txt").read_text())
    exp = raw.get("experiment")
    cfg = build_config(exp, raw, seed=seed)
    old = read_records(run_dir / "records.jsonl")
    issues = []
    if old and old[0]["config_digest"] != build_config(exp, raw).digest:
        issues.append("config digest in records does not match config.txt")
    if cfg.digest != old[0]["config_digest"]:
        issues.append("replay config digest differs from the recorded one")
    new, _, files = execute(cfg, jobs)
    differing = []
    for i in range(max(len(old), len(new))):
        a = _strip(old[i]) if i < len(old) else None
        b = _strip(new[i]) if i < len(new) else None
        if a != b:
            fields = sorted(k for k in set(a or {}) | set(b or {}) if (a or {}).get(k) != (b or {}).get(k))
            differing.append({"batch": i, "fields": fields})
    for name, text in files.items():
        p = run_dir / name
        if not p.exists() or p.read_text() != text:
            differing.append({"file": name})
    return {"run": str(run_dir), "identical": not differing and not issues, "issues": issues, "differing": differing, "records": len(new)}


# --------------------------------------------------------------------- CLI


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardamp", description="Hardness-amplification reduction campaigns.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} campaign")
        sp.add_argument("--config", type=Path, help="flat key = value file")
        sp.add_argument("--seed", type=int, help="seed root (u64)")
        sp.add_argument("--out", type=Path, help=f"output root (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--eta", type=float, help="failure probability per estimate")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads; records do not depend on it")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    rp = sub.add_parser("replay", help="re-run a campaign and compare records")
    rp.add_argument("run", type=Path, help="campaign directory or its records.jsonl")
    rp.add_argument("--seed", type=int, help="replay under a different seed root")
    rp.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "replay":
        try:
            rep = replay(args.run, args.seed, max(1, args.jobs))
        except (ConfigError, FileNotFoundError) as e:
            print(f"replay: {e}", file=sys.stderr)
            return EXIT_CONFIG
        print(json.dumps(rep, indent=2))
        return EXIT_OK if rep["identical"] else EXIT_VERDICT
    try:
        raw = parse_config_text(args.config.read_text()) if args.config else {}
        for item in args.set:
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            raw.update(parse_config_text(f"{key} = {val}"))
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = build_config(args.command, raw, args.seed, args.eta)
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    record, run_dir = run_campaign(cfg, args.out, args.jobs)
    for v in record["verdicts"]:
        print(f"{'PASS' if v['passed'] else 'FAIL'}  {v['inequality']}  lhs={v['lhs']!r} rhs={v['rhs']!r}")
    print(f"records: {run_dir / 'records.jsonl'}")
    return EXIT_OK if all(v["passed"] for v in record["verdicts"]) else EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
