"""Single-instance hard-set generation.

From a randomized distinguisher C(x, b, r) and a predicate P this module
builds a recognizer for a set S* on which C cannot tell P from its negation,
a predictor Q that uses C as an oracle and is right with probability at least
1 - delta/2, and the density delta.  ``verify_theorem1`` checks the three
guarantees exhaustively on small domains.

Oracle accounting: ``HardSetRecognizer.member`` and ``Predictor.predict`` go
to the base distinguisher on every call.  The generator itself, and the
exhaustive verifier, read a per-x memo of the answer counts under the fixed
randomness; the memo is filled through the same counted oracle.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import (
    CallCounter,
    Estimate,
    PredicateOracle,
    SeedPath,
    as_int,
    chernoff_samples,
    estimate_mean_batched,
    exact_fraction,
    range_samples,
    uniform_from_u64,
)


class GenError(RuntimeError):
    """Raised when the generator exhausts its candidate budget."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# -------------------------------------------------------------- distinguishers


class Distinguisher:
    """Counted oracle C(x, b, r) -> bit.

    ``fn(x, b, r)`` is vectorized over broadcastable int64 / uint8 / uint64
    arrays.  ``accept_table`` (shape (2**n, 2)) optionally records the exact
    Pr_r[C(x, b, r) = 1] for planted instances; only verification reads it.
    """

    def __init__(self, n: int, fn: Callable, name: str = "C", accept_table=None):
        self.n = n
        self._fn = fn
        self.name = name
        self.calls = CallCounter()
        self.accept_table = None if accept_table is None else np.asarray(accept_table, dtype=np.float64)

    def _raw(self, x, b, r) -> np.ndarray:
        return np.asarray(self._fn(x, b, r), dtype=np.uint8) & 1

    def eval_many(self, x, b, r) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        b = np.asarray(b, dtype=np.uint8)
        r = np.asarray(r, dtype=np.uint64)
        shape = np.broadcast_shapes(x.shape, b.shape, r.shape)
        self.calls.add(int(np.prod(shape, dtype=np.int64)))
        return np.broadcast_to(self._raw(x, b, r), shape)

    def eval(self, x, b: int, r: int) -> int:
        x = as_int(x, self.n)
        out = self.eval_many(np.array([x]), np.array([b & 1]), np.array([r], dtype=np.uint64))
        return int(out[0])

    def negated(self) -> "Distinguisher":
        return NegatedDistinguisher(self)


class NegatedDistinguisher(Distinguisher):
    """1 - C; calls are charged to the wrapped oracle."""

    def __init__(self, base: Distinguisher):
        self.base = base
        self.n = base.n
        self.name = f"not({base.name})"
        self.calls = base.calls
        self.accept_table = None if base.accept_table is None else 1.0 - base.accept_table

    def eval_many(self, x, b, r):
        return 1 - self.base.eval_many(x, b, r)


class TranscriptMonitor(Distinguisher):
    """Forwards to ``base`` and logs the distinct x values of every call."""

    def __init__(self, base: Distinguisher):
        self.base = base
        self.n = base.n
        self.name = f"monitor({base.name})"
        self.calls = base.calls
        self.accept_table = base.accept_table
        self._lock = threading.Lock()
        self.log: list[tuple[int, ...]] = []

    def eval_many(self, x, b, r):
        xs = tuple(int(v) for v in np.unique(np.asarray(x, dtype=np.int64)))
        with self._lock:
            self.log.append(xs)
        return self.base.eval_many(x, b, r)

    def clear(self) -> None:
        with self._lock:
            self.log.clear()

    def forwarded_only(self, x: int) -> bool:
        """True iff every logged call saw exactly the input x."""
        return bool(self.log) and all(entry == (x,) for entry in self.log)


def planted_distinguisher(p: PredicateOracle, accept, salt: int = 0, name: str = "planted") -> Distinguisher:
    """C(x, b, r) = [U(r) < accept[x, b]] for a table of acceptance
    probabilities; U(r) is r read as a uniform in [0, 1)."""
    acc = np.asarray(accept, dtype=np.float64)
    if acc.shape != (1 << p.n, 2):
        raise ValueError("accept table must have shape (2**n, 2)")

    def fn(x, b, r):
        u = uniform_from_u64(r if salt == 0 else (r ^ np.uint64(salt)))
        return u < acc[x, b]

    return Distinguisher(p.n, fn, name=name, accept_table=acc)


def planted_instance(n: int, seeds: SeedPath, hidden_fraction: float = 0.5, adv_range=(0.2, 0.8)):
    """Random tabulated P and a distinguisher with no advantage on a hidden
    set H and a random advantage in ``adv_range`` elsewhere.  Returns
    (P, C, H mask)."""
    rng = seeds.rng()
    N = 1 << n
    ptab = rng.integers(0, 2, size=N).astype(np.uint8)
    p = PredicateOracle(n, table=ptab, name="planted-P")
    hidden = np.zeros(N, dtype=bool)
    hidden[rng.permutation(N)[: int(round(hidden_fraction * N))]] = True
    adv = rng.uniform(adv_range[0], adv_range[1], size=N)
    base = rng.uniform(0.3, 0.7, size=N)
    acc = np.empty((N, 2))
    right = np.clip(base + adv / 2, 0, 1)
    wrong = np.clip(base - adv / 2, 0, 1)
    right[hidden] = base[hidden]
    wrong[hidden] = base[hidden]
    idx = np.arange(N)
    acc[idx, ptab] = right
    acc[idx, 1 - ptab] = wrong
    return p, planted_distinguisher(p, acc), hidden


class FixedRandomnessDistinguisher:
    """C'(x, b, i) = C(x, b, r_i) for a fixed list r_1..r_m."""

    def __init__(self, base: Distinguisher, rs: np.ndarray):
        rs = np.asarray(rs, dtype=np.uint64)
        if rs.ndim != 1 or len(rs) < 1:
            raise ValueError("need a non-empty 1-d array of randomness values")
        self.base = base
        self.rs = rs
        self.m = len(rs)
        self.n = base.n
        self._memo: dict[int, tuple[int, int]] = {}
        self._lock = threading.Lock()

    @staticmethod
    def size_for(n: int, eps) -> int:
        return math.ceil(Fraction(100 * n) / exact_fraction(eps) ** 2)

    @classmethod
    def sample(cls, base: Distinguisher, eps, seeds: SeedPath) -> "FixedRandomnessDistinguisher":
        m = cls.size_for(base.n, eps)
        rs = seeds.rng().integers(0, 1 << 64, size=m, dtype=np.uint64, endpoint=False)
        return cls(base, rs)

    def eval(self, x, b: int, i: int) -> int:
        return self.base.eval(x, b, int(self.rs[i]))

    def ones(self, x: int, b: int) -> int:
        """Number of i with C'(x, b, i) = 1, straight from the oracle (m calls)."""
        out = self.base.eval_many(np.int64(x), np.uint8(b & 1), self.rs)
        return int(np.count_nonzero(out))

    def counts(self, x: int, cache: bool = True) -> tuple[int, int]:
        """(ones for b=0, ones for b=1); memoized when ``cache``."""
        if cache:
            hit = self._memo.get(x)
            if hit is not None:
                return hit
        c = (self.ones(x, 0), self.ones(x, 1))
        if cache:
            with self._lock:
                self._memo[x] = c
        return c

    def count_table(self) -> np.ndarray:
        """(2**n, 2) array of answer counts, filled through the memo."""
        N = 1 << self.n
        out = np.empty((N, 2), dtype=np.int64)
        for x in range(N):
            out[x] = self.counts(x)
        return out

    def with_base(self, base: Distinguisher) -> "FixedRandomnessDistinguisher":
        return FixedRandomnessDistinguisher(base, self.rs)

    def permuted(self, perm) -> "FixedRandomnessDistinguisher":
        return FixedRandomnessDistinguisher(self.base, self.rs[np.asarray(perm)])


def delta_x(cp: FixedRandomnessDistinguisher, p: PredicateOracle, x) -> Fraction:
    """Exact Pr_i[C'(x,P(x),i)=1] - Pr_i[C'(x,1-P(x),i)=1] (denominator m)."""
    x = as_int(x, cp.n)
    px = p.eval(x)
    c = cp.counts(x)
    return Fraction(c[px] - c[1 - px], cp.m)


def order_le(x1, x2, cp: FixedRandomnessDistinguisher, p: PredicateOracle) -> int:
    """x1 precedes-or-equals x2: smaller delta_x first, ties lexicographic."""
    a, b = as_int(x1, cp.n), as_int(x2, cp.n)
    d1, d2 = delta_x(cp, p, a), delta_x(cp, p, b)
    return int(d1 < d2 or (d1 == d2 and a <= b))


def _delta_numerators(cp: FixedRandomnessDistinguisher, ptab: np.ndarray) -> np.ndarray:
    """m * delta_x for every x."""
    tab = cp.count_table()
    idx = np.arange(len(ptab))
    return tab[idx, ptab] - tab[idx, 1 - ptab]


def _ranks(num: np.ndarray) -> np.ndarray:
    order = np.lexsort((np.arange(len(num)), num))
    rank = np.empty(len(num), dtype=np.int64)
    rank[order] = np.arange(len(num))
    return rank


# ------------------------------------------------------------- S and Q


class FullDomain:
    """Recognizer for the whole domain (the delta = 1 outcome)."""

    full = True

    def __init__(self, n: int):
        self.n = n

    def member(self, x, b: int) -> int:
        return 1

    def contains(self, x: int, px: int) -> bool:
        return True

    def members_mask(self, ptab: np.ndarray) -> np.ndarray:
        return np.ones(len(ptab), dtype=bool)

    def __repr__(self) -> str:
        return "FullDomain()"


@dataclass
class HardSetRecognizer:
    """S(x, b) = [x precedes-or-equals x*] with delta_x computed from b = P(x)."""

    cprime: FixedRandomnessDistinguisher
    x_star: int
    delta_star: Fraction
    flip: bool = False
    full = False

    def _decide(self, num: int, x: int) -> bool:
        d = Fraction(num, self.cprime.m)
        return d < self.delta_star or (d == self.delta_star and x <= self.x_star)

    def member(self, x, b: int) -> int:
        """Oracle evaluation: 2m base calls, x forwarded unchanged."""
        x = as_int(x, self.cprime.n)
        c_b = self.cprime.ones(x, b)
        c_nb = self.cprime.ones(x, 1 - b)
        return int(self._decide(c_b - c_nb, x))

    def contains(self, x: int, px: int) -> bool:
        c = self.cprime.counts(x)
        return self._decide(c[px] - c[1 - px], x)

    def members_mask(self, ptab: np.ndarray) -> np.ndarray:
        num = _delta_numerators(self.cprime, ptab)
        ds = self.delta_star
        # compare num/m with ds exactly: num * ds.den vs ds.num * m
        lhs = num.astype(object) * ds.denominator
        rhs = ds.numerator * self.cprime.m
        xs = np.arange(len(ptab))
        return np.array([(l < rhs) or (l == rhs and x <= self.x_star) for l, x in zip(lhs, xs)], dtype=bool)


def interpolation_prob(gap: Fraction, delta_star: Fraction) -> Fraction:
    """Probability of answering 1 given gap = Pr[C'(x,1)] - Pr[C'(x,0)]."""
    if gap >= delta_star:
        return Fraction(1)
    if gap <= -delta_star:
        return Fraction(0)
    return (1 + gap / delta_star) / 2


class CoinPredictor:
    """Uniform random guess; no oracle calls."""

    coin = True

    def __init__(self, seed: SeedPath):
        self.seed = seed
        self._ctr = 0
        self._lock = threading.Lock()

    def _next_seed(self, x: int) -> SeedPath:
        with self._lock:
            self._ctr += 1
            c = self._ctr
        return self.seed.child(x, c)

    def predict(self, x, seeds: SeedPath | None = None) -> int:
        x = as_int(x)
        s = seeds if seeds is not None else self._next_seed(x)
        return s.stream().bit()

    def prob_one(self, x: int) -> Fraction:
        return Fraction(1, 2)


class Predictor(CoinPredictor):
    """Q(x): majority rule outside the interpolation band, linear interpolation
    inside it.  Output depends only on the two answer counts."""

    coin = False

    def __init__(self, cprime: FixedRandomnessDistinguisher, delta_star: Fraction, flip: bool, seed: SeedPath):
        super().__init__(seed)
        self.cprime = cprime
        self.delta_star = delta_star
        self.flip = flip

    def decide(self, ones1: int, ones0: int, u: float) -> int:
        gap = Fraction(ones1 - ones0, self.cprime.m)
        pr = interpolation_prob(gap, self.delta_star)
        if pr == 1:
            return 1
        if pr == 0:
            return 0
        return int(u < pr)

    def predict(self, x, seeds: SeedPath | None = None) -> int:
        """2m base calls with x forwarded unchanged."""
        x = as_int(x, self.cprime.n)
        ones1 = self.cprime.ones(x, 1)
        ones0 = self.cprime.ones(x, 0)
        s = seeds if seeds is not None else self._next_seed(x)
        return self.decide(ones1, ones0, s.stream().uniform())

    def prob_one(self, x: int) -> Fraction:
        c0, c1 = self.cprime.counts(x)
        return interpolation_prob(Fraction(c1 - c0, self.cprime.m), self.delta_star)

    def with_base(self, base: Distinguisher) -> "Predictor":
        q = Predictor(self.cprime.with_base(base), self.delta_star, self.flip, self.seed)
        q.cprime._memo = self.cprime._memo
        return q


def q_predict(q, x, seeds: SeedPath | None = None) -> int:
    return q.predict(x, seeds)


@dataclass
class GenSingleOutput:
    q: object
    s: object
    delta: float
    eps: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def full_domain(self) -> bool:
        return getattr(self.s, "full", False)


# -------------------------------------------------------------- the generator


def estimate_global_delta(c: Distinguisher, p: PredicateOracle, eps, eta, seeds: SeedPath, jobs: int = 1) -> Estimate:
    """Pr[C(x,P(x),r)=1] - Pr[C(x,1-P(x),r)=1] within eps/4 (signed mean of
    C(x,P,r) - C(x,1-P,r) on uniform (x, r))."""
    N = 1 << p.n

    def batch(rng, size):
        x = rng.integers(0, N, size=size)
        r = rng.integers(0, 1 << 64, size=size, dtype=np.uint64, endpoint=False)
        px = p.eval_many(x)
        a = c.eval_many(x, px, r).astype(np.int8)
        b = c.eval_many(x, 1 - px, r).astype(np.int8)
        return a - b

    return estimate_mean_batched(batch, float(eps) / 4, eta, seeds, low=-1.0, high=1.0, jobs=jobs)


def _uniform_tally(rng: np.random.Generator, draws: int, N: int) -> np.ndarray:
    # counts of each x among `draws` uniform samples (same law as drawing them)
    return rng.multinomial(draws, np.full(N, 1.0 / N))


def _coin_output(n, eps, seeds, diag) -> GenSingleOutput:
    diag["branch"] = "no-advantage"
    return GenSingleOutput(CoinPredictor(seeds.named("coin")), FullDomain(n), 1.0, float(eps), diag)


def _exact_pick(num: np.ndarray, order: np.ndarray, m: int, eps, diag: dict) -> tuple[int, float]:
    """First position in the order whose exact prefix sum lies in
    [eps/20, eps/10]; when the steps are too coarse for that window, the last
    position with prefix sum in (0, eps]."""
    N = len(num)
    prefix = np.cumsum(num[order]).astype(object)
    lo, hi, top = exact_fraction(eps) / 20, exact_fraction(eps) / 10, exact_fraction(eps)
    scale = m * N
    vals = [Fraction(int(v), scale) for v in prefix]
    for j, val in enumerate(vals):
        if lo <= val <= hi:
            return j, float(val)
    good = [j for j, val in enumerate(vals) if 0 < val <= top]
    if not good:
        raise GenError("no admissible x* in the exact prefix sums", diag)
    diag["window_relaxed"] = True
    return good[-1], float(vals[good[-1]])


def _gen_core(c: Distinguisher, p: PredicateOracle, eps, eta, seeds: SeedPath, jobs: int = 1, on_exhaustion: str = "exact") -> GenSingleOutput:
    n = p.n
    N = 1 << n
    eps_f = float(eps)
    diag: dict = {"eps": eps_f, "eta": float(eta)}
    est = estimate_global_delta(c, p, eps, eta, seeds.named("global"), jobs=jobs)
    diag["global_delta"] = est.as_dict()
    if abs(est.value) < 3 * eps_f / 4:
        return _coin_output(n, eps, seeds, diag)
    flip = est.value < -3 * eps_f / 4
    c_eff = c.negated() if flip else c
    diag["flip"] = flip
    cp = FixedRandomnessDistinguisher.sample(c_eff, eps, seeds.named("fix"))
    diag["m"] = cp.m
    ptab = p.full_table()
    num = _delta_numerators(cp, ptab)
    rank = _ranks(num)
    order = np.argsort(rank)
    exhaustive = eps_f <= 10 * 2.0**-n
    diag["exhaustive"] = exhaustive
    q_seed = seeds.named("q")

    if exhaustive:
        pick, val = _exact_pick(num, order, cp.m, eps, diag)
        x_star = int(order[pick])
        delta = (pick + 1) / N
        diag.update(branch="exhaustive", x_star=x_star, prefix_sum=val, delta_prime=delta, exact_density=True)
    else:
        n_cand = math.ceil(Fraction(50 * n) / exact_fraction(eps))
        n_pre = range_samples(eps_f / 100, eta, 2.0)
        lo = eps_f / 20 + eps_f / 100
        hi = eps_f / 10 - eps_f / 100
        cand_rng = seeds.named("candidates").rng()
        x_star = None
        tried = 0
        for t in range(n_cand):
            cand = int(cand_rng.integers(0, N))
            tried += 1
            tally = _uniform_tally(seeds.named("prefix").child(t).rng(), n_pre, N)
            inside = rank <= rank[cand]
            val = float(np.dot(tally[inside], num[inside])) / (n_pre * cp.m)
            if lo <= val <= hi:
                x_star = cand
                diag["prefix_estimate"] = {"value": val, "half_width": eps_f / 100, "samples": n_pre}
                break
        diag["candidates"] = {"budget": n_cand, "tried": tried}
        if x_star is None and on_exhaustion == "raise":
            raise GenError(f"no candidate x* met the prefix window after {n_cand} candidates", diag)
    if not exhaustive and x_star is None:
        # the count table is complete, so select exactly instead
        pick, val = _exact_pick(num, order, cp.m, eps, diag)
        x_star = int(order[pick])
        delta = (pick + 1) / N
        diag.update(branch="exact-fallback", x_star=x_star, prefix_sum=val, delta_prime=delta, exact_density=True)
    elif not exhaustive:
        n_den = chernoff_samples(eps_f / 1000, eta)
        tally = _uniform_tally(seeds.named("density").rng(), n_den, N)
        members = rank <= rank[x_star]
        delta_prime = float(tally[members].sum()) / n_den
        delta = max(0.0, delta_prime - eps_f / 1000)
        diag.update(branch="sampled", x_star=x_star, delta_prime=delta_prime, density_samples=n_den)

    delta_star = Fraction(int(num[x_star]), cp.m)
    diag["delta_star"] = float(delta_star)
    s = HardSetRecognizer(cp, x_star, delta_star, flip)
    q = Predictor(cp, delta_star, flip, q_seed)
    out = GenSingleOutput(q, s, float(delta), eps_f, diag)
    out.diagnostics["_rank"] = rank
    out.diagnostics["_num"] = num
    return out


def gen_single(
    c: Distinguisher,
    p: PredicateOracle,
    eps,
    eta,
    seeds: SeedPath,
    strict_gain: bool = False,
    jobs: int = 1,
    on_exhaustion: str = "exact",
) -> GenSingleOutput:
    """Hard-set generator.  With ``strict_gain`` the core runs at eps/3 and
    the set is enlarged by between eps/2 and 2eps/3 so that Q beats
    1 - delta/2 by eps/4 whenever delta < 1.

    ``on_exhaustion`` says what happens when no sampled candidate meets the
    prefix window: "exact" selects from the exact prefix sums (the count
    table is complete on these domains), "raise" raises GenError."""
    if on_exhaustion not in ("exact", "raise"):
        raise ValueError("on_exhaustion must be 'exact' or 'raise'")
    if not 0 < float(eps) < 1:
        raise ValueError("eps must lie in (0, 1)")
    if p.n < 4:
        raise ValueError("need n >= 4")
    if c.n != p.n:
        raise ValueError("distinguisher and predicate disagree on n")
    if not strict_gain:
        return _finish(_gen_core(c, p, eps, eta, seeds, jobs, on_exhaustion))

    eps_f = float(eps)
    inner = _gen_core(c, p, exact_fraction(eps) / 3, eta, seeds.named("strict"), jobs, on_exhaustion)
    diag = {"strict_gain": True, "inner": {k: v for k, v in inner.diagnostics.items() if not k.startswith("_")}}
    if inner.full_domain:
        inner.eps = eps_f
        inner.diagnostics = diag | {"branch": inner.diagnostics.get("branch")}
        return inner
    if inner.delta > 1 - 2 * eps_f / 3:
        diag["branch"] = "near-full"
        return GenSingleOutput(inner.q, FullDomain(p.n), 1.0, eps_f, diag)

    cp = inner.s.cprime
    rank, num = inner.diagnostics["_rank"], inner.diagnostics["_num"]
    N = 1 << p.n
    base_density = inner.diagnostics["delta_prime"]
    exact_inner = bool(inner.diagnostics.get("exact_density"))
    inner_err = 0.0 if exact_inner else (eps_f / 3) / 1000
    x2 = None
    if not inner.diagnostics.get("exhaustive"):
        h = eps_f / 100
        lo = base_density + eps_f / 2 + h + inner_err
        hi = base_density + 2 * eps_f / 3 - h - inner_err
        n_cand = math.ceil(Fraction(50 * p.n) / exact_fraction(eps))
        n_den = chernoff_samples(h, eta)
        crng = seeds.named("enlarge").rng()
        for t in range(n_cand):
            cand = int(crng.integers(0, N))
            tally = _uniform_tally(seeds.named("enlarge-density").child(t).rng(), n_den, N)
            d = float(tally[rank <= rank[cand]].sum()) / n_den
            if lo <= d <= hi:
                x2, new_density = cand, d
                diag["enlarge_tries"] = t + 1
                break
        if x2 is None and (on_exhaustion == "raise" or not exact_inner):
            raise GenError(f"no enlargement candidate after {n_cand} tries", diag)
        if x2 is None:
            diag["enlarge_fallback"] = "exact"
    if x2 is None:
        # exact densities: take the first x in order whose prefix density
        # exceeds the old one by at least eps/2
        order = np.argsort(rank)
        need = base_density + eps_f / 2
        j = min(int(math.ceil(need * N - 1e-9)) - 1, N - 1)
        x2 = int(order[j])
        new_density = (j + 1) / N
        if new_density - base_density > 2 * eps_f / 3 + 1e-12:
            raise GenError("exact enlargement overshoots 2eps/3", diag)
    s2 = HardSetRecognizer(cp, x2, Fraction(int(num[x2]), cp.m), inner.s.flip)
    delta = inner.delta + eps_f / 2
    diag.update(branch="enlarged", x_star=x2, enlarged_density_estimate=new_density, inner_delta=inner.delta)
    return GenSingleOutput(inner.q, s2, delta, eps_f, diag)


def _finish(out: GenSingleOutput) -> GenSingleOutput:
    out.diagnostics.pop("_rank", None)
    out.diagnostics.pop("_num", None)
    return out


# -------------------------------------------------------------- verification


@dataclass
class Theorem1Report:
    n: int
    eps: float
    delta: float
    mu_s: Fraction
    indist_gap: Fraction
    q_success: Fraction
    checks: dict
    violations: list
    indist_gap_fixed: Fraction | None = None

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "eps": self.eps,
            "delta": self.delta,
            "mu_s": float(self.mu_s),
            "indist_gap": float(self.indist_gap),
            "indist_gap_fixed": None if self.indist_gap_fixed is None else float(self.indist_gap_fixed),
            "q_success": float(self.q_success),
            "checks": self.checks,
            "violations": self.violations,
        }


def _exact_gap_table(acc: np.ndarray, ptab: np.ndarray, mask: np.ndarray) -> Fraction:
    """|E_x[1_S(x) (acc[x,P(x)] - acc[x,1-P(x)])]| with the table entries read
    as exact binary fractions."""
    idx = np.nonzero(mask)[0]
    total = sum((Fraction(float(acc[x, ptab[x]])) - Fraction(float(acc[x, 1 - ptab[x]])) for x in idx), Fraction(0))
    return abs(total / len(ptab))


def _exact_gap_full(c: Distinguisher, ptab: np.ndarray, out: GenSingleOutput, eps) -> Fraction:
    """|Pr[C(x,P)] - Pr[C(x,1-P)]| for the full-domain outcome."""
    cp = getattr(out.q, "cprime", None)
    if cp is not None:
        num = _delta_numerators(cp, ptab)
        return abs(Fraction(int(num.sum()), cp.m * len(ptab)))
    if c.accept_table is not None:
        idx = np.arange(len(ptab))
        acc = c.accept_table
        vals = [Fraction(float(acc[x, ptab[x]])) - Fraction(float(acc[x, 1 - ptab[x]])) for x in idx]
        return abs(sum(vals, Fraction(0)) / len(ptab))
    cp = FixedRandomnessDistinguisher.sample(c, eps, SeedPath(0, (0xF1,)))
    num = _delta_numerators(cp, ptab)
    return abs(Fraction(int(num.sum()), cp.m * len(ptab)))


def verify_theorem1(
    out: GenSingleOutput, c: Distinguisher, p: PredicateOracle, eps, require_gain: bool | None = None
) -> Theorem1Report:
    """Exhaustive check of large set, indistinguishability and predictability.

    The eps/4 gain over 1 - delta/2 is checked when ``require_gain`` (default:
    the output came from a strict_gain run)."""
    n = p.n
    if n > 12:
        raise ValueError("exhaustive verification is limited to n <= 12")
    N = 1 << n
    ptab = p.table if p.tabulated else p.full_table()
    eps_fr = exact_fraction(eps)
    delta = out.delta
    if out.full_domain:
        mu = Fraction(1)
        mask = np.ones(N, dtype=bool)
        gap_fixed = _exact_gap_full(c, ptab, out, eps)
    else:
        mask = out.s.members_mask(ptab)
        mu = Fraction(int(mask.sum()), N)
        num = _delta_numerators(out.s.cprime, ptab)
        gap_fixed = abs(Fraction(int(num[mask].sum()), out.s.cprime.m * N))
    # the real C's gap when its acceptance table is known, else C''s
    gap = gap_fixed if c.accept_table is None else _exact_gap_table(c.accept_table, ptab, mask)
    if getattr(out.q, "coin", False):
        succ = Fraction(1, 2)
    else:
        total = Fraction(0)
        for x in range(N):
            pr = out.q.prob_one(x)
            total += pr if ptab[x] == 1 else 1 - pr
        succ = total / N
    checks = {
        "large_set": bool(mu >= Fraction(delta)),
        "indistinguishability": bool(gap <= eps_fr),
        "predictability": bool(succ >= 1 - Fraction(delta) / 2),
    }
    if require_gain is None:
        require_gain = bool(out.diagnostics.get("strict_gain"))
    if require_gain and delta < 1:
        checks["predictability_gain"] = bool(succ >= 1 - Fraction(delta) / 2 + eps_fr / 4)
    violations = [k for k, v in checks.items() if not v]
    return Theorem1Report(n, float(eps), delta, mu, gap, succ, checks, violations, gap_fixed)
