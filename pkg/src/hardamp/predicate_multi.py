"""Multi-instance hard sets: per-prefix set generation, the global predictor
search over random rounds, Experiments 1/2 and the hybrids between them, and
two demonstrations on top (an XOR bound check and a toy extractor).

A k-input distinguisher is called as ``fn(xs, bs, r)`` where ``xs`` and
``bs`` are length-k lists of arrays.  Columns broadcast against each other and
against ``r``, so a fixed prefix can be passed as scalars.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import (
    CallCounter,
    PredicateOracle,
    SeedPath,
    as_int,
    digest_int,
    estimate_mean_batched,
    exact_fraction,
    mix64_np,
    uniform_from_u64,
)
from .predicate_single import (
    Distinguisher,
    GenSingleOutput,
    gen_single,
)

_INNER_SALT = 0x5EED


class MultiDistinguisher:
    """Counted k-input oracle C(x_1, b_1, ..., x_k, b_k, r)."""

    def __init__(self, k: int, n: int, fn: Callable, name: str = "Ck", calls: CallCounter | None = None):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.n = n
        self._fn = fn
        self.name = name
        self.calls = calls if calls is not None else CallCounter()

    def _raw(self, xs, bs, r) -> np.ndarray:
        return np.asarray(self._fn(xs, bs, r), dtype=np.uint8) & 1

    def eval_many(self, xs, bs, r) -> np.ndarray:
        if len(xs) != self.k or len(bs) != self.k:
            raise ValueError(f"expected {self.k} columns")
        xs = [np.asarray(c, dtype=np.int64) for c in xs]
        bs = [np.asarray(c, dtype=np.uint8) for c in bs]
        r = np.asarray(r, dtype=np.uint64)
        shape = np.broadcast_shapes(r.shape, *(c.shape for c in xs), *(c.shape for c in bs))
        self.calls.add(int(np.prod(shape, dtype=np.int64)))
        return np.broadcast_to(self._raw(xs, bs, r), shape)

    def eval(self, xs, bs, r: int) -> int:
        xs = [as_int(x, self.n) for x in xs]
        out = self.eval_many([np.int64(x) for x in xs], [np.uint8(b & 1) for b in bs], np.uint64(r))
        return int(out)


class MultiMonitor(MultiDistinguisher):
    """Forwards to ``base`` and records, per call and per slot, the constant
    value of that column (or None when it varies)."""

    def __init__(self, base: MultiDistinguisher):
        super().__init__(base.k, base.n, base._fn, f"monitor({base.name})", base.calls)
        self.base = base
        self._lock = threading.Lock()
        self.log: list[tuple] = []

    @staticmethod
    def _const(col: np.ndarray):
        if col.size == 1:
            return int(col.reshape(-1)[0])
        lo, hi = int(col.min()), int(col.max())
        return lo if lo == hi else None

    def _raw(self, xs, bs, r):
        entry = (tuple(self._const(c) for c in xs), tuple(self._const(c) for c in bs))
        with self._lock:
            self.log.append(entry)
        return self.base._raw(xs, bs, r)

    def clear(self) -> None:
        with self._lock:
            self.log.clear()

    def certify(self, slot: int, prefix: "Prefix", x: int) -> bool:
        """Every logged call had the prefix in slots 1..slot-1 and x at slot."""
        if not self.log:
            return False
        want_x = tuple(px for px, _ in prefix.pairs)
        want_b = tuple(pb for _, pb in prefix.pairs)
        for xs, bs in self.log:
            if xs[: slot - 1] != want_x or bs[: slot - 1] != want_b or xs[slot - 1] != x:
                return False
        return True


@dataclass(frozen=True)
class Prefix:
    i: int
    pairs: tuple = ()

    def __post_init__(self):
        if self.i < 1:
            raise ValueError("position i starts at 1")
        if len(self.pairs) != self.i - 1:
            raise ValueError("prefix must hold exactly i-1 pairs")

    def extend(self, x: int, b: int) -> "Prefix":
        return Prefix(self.i + 1, self.pairs + ((int(x), int(b)),))

    def digest(self) -> int:
        return digest_int("prefix", self.i, self.pairs)


class InducedDistinguisher(Distinguisher):
    """C_t(x, b, r): prefix t, live input at slot t.i, and a suffix of
    uniform x_j with b_j = P(x_j) drawn from r.  Each evaluation is one call
    of the k-input oracle; suffix predicate lookups are counted in
    ``suffix_calls``."""

    def __init__(self, ck: MultiDistinguisher, t: Prefix, p: PredicateOracle, salt: int = 0):
        if not 1 <= t.i <= ck.k:
            raise ValueError("prefix position outside 1..k")
        self.ck = ck
        self.t = t
        self.p = p
        self.n = p.n
        self.salt = salt
        self.name = f"{ck.name}|{t.i}"
        self.calls = ck.calls
        self.accept_table = None
        self.suffix_calls = CallCounter()
        self._last = None
        self._lock = threading.Lock()

    def _suffix(self, r: np.ndarray):
        last = self._last
        if last is not None and last[0] is r:
            return last[1], last[2], last[3]
        mask = np.uint64((1 << self.n) - 1)
        sx, sb = [], []
        for j in range(self.t.i + 1, self.ck.k + 1):
            xj = (mix64_np(r, salt=self.salt + j) & mask).astype(np.int64)
            self.suffix_calls.add(xj.size)
            sx.append(xj)
            sb.append(self.p._raw(xj.reshape(-1)).reshape(xj.shape))
        inner = mix64_np(r, salt=self.salt + _INNER_SALT)
        with self._lock:
            self._last = (r, sx, sb, inner)
        return sx, sb, inner

    def eval_many(self, x, b, r):
        x = np.asarray(x, dtype=np.int64)
        b = np.asarray(b, dtype=np.uint8)
        r = np.asarray(r, dtype=np.uint64)
        sx, sb, inner = self._suffix(r)
        xs = [np.int64(px) for px, _ in self.t.pairs] + [x] + sx
        bs = [np.uint8(pb) for _, pb in self.t.pairs] + [b] + sb
        return self.ck.eval_many(xs, bs, inner)


def induced_single(ck: MultiDistinguisher, t: Prefix, p: PredicateOracle, seeds: SeedPath | None = None) -> InducedDistinguisher:
    salt = 0 if seeds is None else seeds.key() & 0xFFFF
    return InducedDistinguisher(ck, t, p, salt)


class PrefixSetGenerator:
    """Runs the single-instance generator at eps/4k on the distinguisher
    induced by a prefix.  Results are cached per prefix and seeded by the
    prefix digest, so a given prefix always yields the same set."""

    def __init__(self, base: MultiDistinguisher, p: PredicateOracle, eps, eta, seeds: SeedPath, strict_gain: bool = False, jobs: int = 1):
        self.base = base
        self.p = p
        self.eps = eps
        self.inner_eps = exact_fraction(eps) / (4 * base.k)
        self.eta = eta
        self.seeds = seeds
        self.strict_gain = strict_gain
        self.jobs = jobs
        self._cache: dict[Prefix, GenSingleOutput] = {}
        self._density: dict[Prefix, float] = {}
        self._lock = threading.Lock()
        self._ptab = p.table if p.tabulated else None

    def __call__(self, t: Prefix) -> GenSingleOutput:
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        c = induced_single(self.base, t, self.p)
        out = gen_single(c, self.p, self.inner_eps, self.eta, self.seeds.child(t.digest()), self.strict_gain, self.jobs)
        with self._lock:
            self._cache.setdefault(t, out)
        return self._cache[t]

    def density(self, t: Prefix) -> float:
        """Exact mu(S*_t) for n <= 12 and tabulated P; else the delta'
        estimate recorded by the generator."""
        if t in self._density:
            return self._density[t]
        out = self(t)
        if out.full_domain:
            d = 1.0
        elif self._ptab is not None and self.p.n <= 12:
            d = float(out.s.members_mask(self._ptab).mean())
        else:
            d = float(out.diagnostics.get("delta_prime", out.delta))
        self._density[t] = d
        return d

    @property
    def prefixes_seen(self) -> int:
        return len(self._cache)


def gen_s(gs: PrefixSetGenerator, t: Prefix):
    return gs(t).s


# -------------------------------------------------------------- experiments


@dataclass
class ExperimentOutcome:
    output: int
    xs: tuple
    bs: tuple
    set_densities: list = field(default_factory=list)
    randomized_rounds: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "output": self.output,
            "xs": list(self.xs),
            "bs": list(self.bs),
            "set_densities": self.set_densities,
            "randomized_rounds": self.randomized_rounds,
        }


def _round_x(seeds: SeedPath, i: int, n: int) -> int:
    return seeds.child(1, i).stream().randbelow(1 << n)


def _round_coin(seeds: SeedPath, i: int) -> int:
    return seeds.child(2, i).stream().bit()


def _run_rounds(ck, gs, p, seeds, j, contains=None) -> ExperimentOutcome:
    """Rounds 1..j use the set rule, the rest b_i = P(x_i)."""
    k, n = ck.k, p.n
    t = Prefix(1)
    xs, bs, dens, rand = [], [], [], []
    for i in range(1, k + 1):
        x = _round_x(seeds, i, n)
        px = p.eval(x)
        b = px
        if i <= j:
            if contains is not None:
                inside = contains(t, x, px)
                dens.append(None)
            else:
                out = gs(t)
                inside = out.s.contains(x, px)
                dens.append(gs.density(t))
            if inside:
                b = _round_coin(seeds, i)
                rand.append(i)
        xs.append(x)
        bs.append(b)
        t = t.extend(x, b) if i < k else t
    r = seeds.child(3).stream().next64()
    y = ck.eval(xs, bs, r)
    return ExperimentOutcome(y, tuple(xs), tuple(bs), dens, rand)


def experiment1(ck: MultiDistinguisher, p: PredicateOracle, seeds: SeedPath) -> int:
    return _run_rounds(ck, None, p, seeds, 0).output


def experiment1_trace(ck, p, seeds) -> ExperimentOutcome:
    return _run_rounds(ck, None, p, seeds, 0)


def experiment2(ck: MultiDistinguisher, gs: PrefixSetGenerator, p: PredicateOracle, seeds: SeedPath, contains=None) -> ExperimentOutcome:
    """``contains(t, x, px)`` overrides the generated sets (for tests)."""
    return _run_rounds(ck, gs, p, seeds, ck.k, contains)


def hybrid(j: int, ck: MultiDistinguisher, gs: PrefixSetGenerator, p: PredicateOracle, seeds: SeedPath, contains=None) -> int:
    if not 0 <= j <= ck.k:
        raise ValueError("hybrid index must be in 0..k")
    return _run_rounds(ck, gs, p, seeds, j, contains).output


def hybrid_trace(j, ck, gs, p, seeds, contains=None) -> ExperimentOutcome:
    if not 0 <= j <= ck.k:
        raise ValueError("hybrid index must be in 0..k")
    return _run_rounds(ck, gs, p, seeds, j, contains)


# ------------------------------------------------------------ predictor search


class PrefixPredictor:
    """Predictor for one round, with the slot and the fixed prefix it was
    built for recorded."""

    def __init__(self, inner, slot: int, prefix: Prefix, delta: float, iteration: int, output: GenSingleOutput | None):
        self.inner = inner
        self.slot = slot
        self.prefix = prefix
        self.delta = delta
        self.iteration = iteration
        self.output = output

    @property
    def coin(self) -> bool:
        return getattr(self.inner, "coin", False)

    def predict(self, x, seeds: SeedPath | None = None) -> int:
        return self.inner.predict(x, seeds)

    def prob_one(self, x: int) -> Fraction:
        return self.inner.prob_one(x)

    def exact_success(self, p: PredicateOracle) -> Fraction:
        ptab = p.table if p.tabulated else p.full_table()
        total = Fraction(0)
        for x in range(len(ptab)):
            pr = self.prob_one(x)
            total += pr if ptab[x] else 1 - pr
        return total / len(ptab)

    def describe(self) -> dict:
        return {"slot": self.slot, "prefix": [list(pr) for pr in self.prefix.pairs], "delta": self.delta, "iteration": self.iteration}


def gen_multi(
    ck: MultiDistinguisher,
    p: PredicateOracle,
    eps,
    eta,
    k: int,
    seeds: SeedPath,
    gs: PrefixSetGenerator | None = None,
) -> tuple[PrefixPredictor, float]:
    """ceil(nk/eps) iterations; each walks Experiment 2 up to a random round i
    and runs the generator on that prefix.  Returns the (Q, delta) pair with
    the smallest delta, the earliest iteration winning ties."""
    if k < 1 or k != ck.k:
        raise ValueError("k must be >= 1 and match the distinguisher")
    if not 0 < float(eps) < 1:
        raise ValueError("eps must lie in (0, 1)")
    if gs is None:
        gs = PrefixSetGenerator(ck, p, eps, eta, seeds.named("sets"))
    n = p.n
    iters = math.ceil(Fraction(n * k) / exact_fraction(eps))
    best = None
    for it in range(iters):
        s = seeds.named("iteration").child(it)
        i = 1 + s.child(0).stream().randbelow(k)
        t = Prefix(1)
        for j in range(1, i):
            x = _round_x(s, j, n)
            px = p.eval(x)
            b = _round_coin(s, j) if gs(t).s.contains(x, px) else px
            t = t.extend(x, b)
        out = gs(t)
        if best is None or out.delta < best[0]:
            best = (out.delta, it, t, out)
    delta, it, t, out = best
    q = PrefixPredictor(out.q, t.i, t, delta, it, out)
    return q, delta


# ------------------------------------------------------------------- XOR


class XorAttacker:
    """Counted procedure (x_1..x_k, r) -> guess for P(x_1) xor ... xor P(x_k)."""

    def __init__(self, k: int, n: int, fn: Callable, name: str = "Cxor"):
        self.k = k
        self.n = n
        self._fn = fn
        self.name = name
        self.calls = CallCounter()

    def eval_many(self, xs, r) -> np.ndarray:
        xs = [np.asarray(c, dtype=np.int64) for c in xs]
        r = np.asarray(r, dtype=np.uint64)
        shape = np.broadcast_shapes(r.shape, *(c.shape for c in xs))
        self.calls.add(int(np.prod(shape, dtype=np.int64)))
        return np.broadcast_to(np.asarray(self._fn(xs, r), dtype=np.uint8) & 1, shape)


def xor_wrap(cxor: XorAttacker, k: int) -> MultiDistinguisher:
    """1 iff the attacker's guess equals b_1 xor ... xor b_k."""
    if k != cxor.k:
        raise ValueError("arity mismatch")

    def fn(xs, bs, r):
        par = np.zeros((), dtype=np.uint8)
        for b in bs:
            par = par ^ b
        return (cxor.eval_many(xs, r) ^ par) == 0

    # the attacker counts its own calls; the wrapper shares that counter
    return MultiDistinguisher(k, cxor.n, fn, f"xorwrap({cxor.name})", calls=cxor.calls)


def noisy_xor_attacker(p: PredicateOracle, delta_prime: float, k: int) -> XorAttacker:
    """Per-coordinate side channel equal to P(x_j) with probability
    1 - delta'/2; the guess is the XOR of the side bits."""
    ptab = p.table

    def fn(xs, r):
        out = np.zeros((), dtype=np.uint8)
        for j, x in enumerate(xs):
            flip = uniform_from_u64(mix64_np(r, salt=100 + j)) < delta_prime / 2
            out = out ^ ptab[x] ^ flip.astype(np.uint8)
        return out

    return XorAttacker(k, p.n, fn, name=f"noisy({delta_prime})")


def noisy_xor_success(delta_prime, k: int):
    """Exact success of ``noisy_xor_attacker``: 1/2 + (1 - delta')^k / 2."""
    d = exact_fraction(delta_prime) if not isinstance(delta_prime, Fraction) else delta_prime
    return Fraction(1, 2) + (1 - d) ** k / 2


def backdoor_xor_attacker(p: PredicateOracle, k: int, seeds: SeedPath, fraction: float = 0.875) -> tuple[XorAttacker, np.ndarray]:
    """Knows P exactly on a random ``fraction`` of the domain and guesses a
    fresh bit elsewhere.  Returns (attacker, backdoor mask)."""
    N = 1 << p.n
    mask = np.zeros(N, dtype=bool)
    mask[seeds.rng().permutation(N)[: int(round(fraction * N))]] = True
    ptab = p.table

    def fn(xs, r):
        out = np.zeros((), dtype=np.uint8)
        for j, x in enumerate(xs):
            coin = (mix64_np(r, salt=200 + j) >> np.uint64(63)).astype(np.uint8)
            out = out ^ np.where(mask[x], ptab[x], coin).astype(np.uint8)
        return out

    return XorAttacker(k, p.n, fn, name=f"backdoor({fraction})"), mask


def xor_bound_check(
    cxor: XorAttacker,
    p: PredicateOracle,
    k: int,
    delta_prime: float,
    eps: float,
    seeds: SeedPath,
    eta: float = 1e-3,
    half_width: float = 0.01,
    gen_eps: float | None = None,
) -> dict:
    """Measure Pr[cxor = P(x_1) xor ... xor P(x_k)] against 1/2 + (1-delta')^k
    + eps.  When the bound is exceeded, run the predictor search on the
    wrapper and check the extracted predictor exhaustively."""
    N = 1 << p.n

    def batch(rng, size):
        xs = [rng.integers(0, N, size=size) for _ in range(k)]
        r = rng.integers(0, 1 << 64, size=size, dtype=np.uint64, endpoint=False)
        truth = np.zeros(size, dtype=np.uint8)
        for x in xs:
            truth ^= p.eval_many(x)
        return (cxor.eval_many(xs, r) == truth).astype(np.float64)

    est = estimate_mean_batched(batch, half_width, eta, seeds.named("measure"))
    bound = 0.5 + (1 - delta_prime) ** k + eps
    report = {
        "k": k,
        "delta_prime": delta_prime,
        "eps": eps,
        "measured": est.as_dict(),
        "bound": bound,
        "within_bound": bool(est.value <= bound),
    }
    if not report["within_bound"]:
        ge = eps if gen_eps is None else gen_eps
        ck = MultiMonitor(xor_wrap(cxor, k))
        q, delta = gen_multi(ck, p, ge, eta, k, seeds.named("extract"))
        succ = q.exact_success(p) if p.n <= 12 else None
        report["extraction"] = {
            "gen_eps": ge,
            "delta": delta,
            "predictor": q.describe(),
            "exact_success": None if succ is None else float(succ),
            "target": 1 - delta_prime / 2,
            "beats_target": None if succ is None else bool(succ >= 1 - exact_fraction(delta_prime) / 2),
        }
    return report


# ------------------------------------------------------------ extraction demo


@dataclass
class PairSource:
    """Tabulated (f(x), P(x)) source with a designated hard set."""

    f: np.ndarray
    p: np.ndarray
    hard_set: np.ndarray | None = None

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=np.int64)
        self.p = np.asarray(self.p, dtype=np.uint8)
        if self.f.shape != self.p.shape or self.f.ndim != 1:
            raise ValueError("f and P tables must be 1-d and equally long")
        N = len(self.f)
        if N & (N - 1):
            raise ValueError("table length must be a power of two")
        if self.hard_set is not None:
            self.hard_set = np.asarray(self.hard_set, dtype=bool)

    @property
    def n(self) -> int:
        return len(self.f).bit_length() - 1


def _gf2_apply(a_rows: np.ndarray, b_idx: np.ndarray) -> np.ndarray:
    """y = A b over GF(2); rows of A and the vectors b are bitmasks."""
    out = np.zeros(b_idx.shape, dtype=np.int64)
    for row, mask in enumerate(a_rows):
        par = np.zeros(b_idx.shape, dtype=np.int64)
        v = b_idx & int(mask)
        while v.any():
            par ^= v & 1
            v = v >> 1
        out |= par << row
    return out


def extraction_experiment(
    pep: PairSource,
    k: int,
    delta_prime: float,
    seeds: SeedPath,
    hard_set=None,
    out_bits: int | None = None,
    exact_limit: int = 1 << 22,
) -> dict:
    """Experiment 2 with a fixed hard set H: b_i is a fresh coin when x_i is
    in H and P(x_i) otherwise.  The observer sees (f(x_1..x_k), A, A b) for a
    random binary m x k matrix A.  Reports the exact statistical distance of
    A b from uniform given the view, for the recorded A and averaged over all
    A, with the leftover-hash bound."""
    if not isinstance(pep, PairSource):
        raise TypeError("extraction_experiment needs a tabulated PairSource")
    n = pep.n
    if n > 10 or not 1 <= k <= 16:
        raise ValueError("toy mode needs n <= 10 and 1 <= k <= 16")
    H = hard_set if hard_set is not None else pep.hard_set
    if H is None:
        raise ValueError("no hard set given")
    H = np.asarray(H, dtype=bool)
    N = 1 << n
    mu = float(H.mean())
    m = max(0, math.floor((delta_prime - 1 / n) * k)) if out_bits is None else out_bits
    if m < 0:
        raise ValueError("out_bits must be >= 0")

    # per-x law of (z, b): posterior Pr[b = 1 | z] for each z value
    zs, inv = np.unique(pep.f, return_inverse=True)
    weight = np.bincount(inv, minlength=len(zs)).astype(object)
    ones = [Fraction(0)] * len(zs)
    for x in range(N):
        ones[inv[x]] += Fraction(1, 2) if H[x] else Fraction(int(pep.p[x]))
    post = [ones[z] / int(weight[z]) for z in range(len(zs))]
    classes: dict[Fraction, Fraction] = {}
    for z in range(len(zs)):
        classes[post[z]] = classes.get(post[z], Fraction(0)) + Fraction(int(weight[z]), N)
    pis = sorted(classes)
    cls_w = [classes[v] for v in pis]

    rng = seeds.named("matrix").rng()
    a_rows = rng.integers(0, 1 << k, size=m, dtype=np.int64) if m else np.zeros(0, dtype=np.int64)
    b_all = np.arange(1 << k, dtype=np.int64)
    n_mats = 1 << (m * k)
    exhaustive = n_mats * (1 << k) <= exact_limit
    if exhaustive:
        mats = np.array(list(itertools.product(range(1 << k), repeat=m)), dtype=np.int64).reshape(n_mats, m)
    else:
        mats = seeds.named("matrix-sample").rng().integers(0, 1 << k, size=(1024, m), dtype=np.int64)
    y_rec = _gf2_apply(a_rows, b_all)
    y_all = np.stack([_gf2_apply(row, b_all) for row in mats]) if m else np.zeros((len(mats), 1 << k), dtype=np.int64)

    def law(coord):
        pb = np.ones(1 << k)
        for i, pi in enumerate(coord):
            bit = (b_all >> i) & 1
            pb *= np.where(bit == 1, pi, 1 - pi)
        return pb

    # the recorded matrix is not symmetric in the coordinates: ordered tuples
    sd_rec = None
    if len(pis) ** k <= 1 << 16:
        sd_rec = 0.0
        for tup in itertools.product(range(len(pis)), repeat=k):
            w = float(math.prod(cls_w[c] for c in tup))
            if w:
                pb = law([float(pis[c]) for c in tup])
                sd_rec += w * _sd_uniform(np.bincount(y_rec, weights=pb, minlength=1 << m))

    # averaged over all matrices the law is symmetric: multisets suffice
    sd_avg = 0.0
    lhl = 0.0
    for counts in _compositions(k, len(pis)):
        w = float(_multinomial(counts) * math.prod(cls_w[c] ** counts[c] for c in range(len(pis))))
        if w == 0:
            continue
        pb = law([float(pis[c]) for c in range(len(pis)) for _ in range(counts[c])])
        flat = (np.arange(len(mats))[:, None] << m) | y_all
        dist = np.bincount(flat.reshape(-1), weights=np.tile(pb, len(mats)), minlength=len(mats) << m).reshape(len(mats), 1 << m)
        sd_avg += w * float(np.mean(0.5 * np.abs(dist - 2.0**-m).sum(axis=1)))
        cp = float(np.sum(pb**2))
        lhl += w * min(1.0, 0.5 * math.sqrt((2**m) * cp))

    # rounds landing in H: binomial(k, mu)
    landing_rng = seeds.named("landing").rng()
    xs = landing_rng.integers(0, N, size=k)
    landed = int(H[xs].sum())
    threshold = (mu - 1 / (4 * n)) * k
    p_reach = sum(math.comb(k, j) * mu**j * (1 - mu) ** (k - j) for j in range(k + 1) if j >= threshold)
    return {
        "n": n,
        "k": k,
        "out_bits": m,
        "hard_set_density": mu,
        "extractor": "random binary matrix over GF(2)",
        "matrix_rows": [int(v) for v in a_rows],
        "matrices": "all" if exhaustive else "sampled",
        "distance_recorded_matrix": sd_rec,
        "distance_average": sd_avg,
        "leftover_hash_bound": lhl,
        "within_bound": bool(sd_avg <= lhl + 1e-12),
        "landed_rounds": landed,
        "landing_threshold": threshold,
        "landing_probability": p_reach,
    }


def _sd_uniform(dist: np.ndarray) -> float:
    return 0.5 * float(np.abs(dist - 1.0 / len(dist)).sum())


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial(counts) -> int:
    out, acc = 1, 0
    for c in counts:
        acc += c
        out *= math.comb(acc, c)
    return out
