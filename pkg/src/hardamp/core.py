"""Shared substrate: bit strings, seeded streams, counted oracles, estimators.

Everything random in the package is drawn from a ``SeedPath``.  A path is a
root seed plus a tuple of non-negative derivation indices, so the stream used
by trial ``j`` of estimate ``e`` never depends on how trials were scheduled.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

MASK64 = (1 << 64) - 1
DEFAULT_ETA = 1e-3
MAX_TABLE_ARITY = 20

_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python int."""
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * _M1) & MASK64
    x = ((x ^ (x >> 27)) * _M2) & MASK64
    return x ^ (x >> 31)


def mix64_np(x: np.ndarray, salt: int = 0) -> np.ndarray:
    """Vectorized splitmix64 finalizer; ``salt`` selects an independent lane."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):  # wraparound is intended
        x = x + np.uint64((_GOLDEN * (salt + 1)) & MASK64)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_M1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_M2)
    return x ^ (x >> np.uint64(31))


def uniform_from_u64(x: np.ndarray) -> np.ndarray:
    """Map 64-bit words to floats in [0, 1) using the top 53 bits."""
    return (np.asarray(x, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * 2.0**-53


# ---------------------------------------------------------------- bit strings


@dataclass(frozen=True)
class BitVec:
    """An n-bit string.  Bit 0 is the most significant, so integer order is
    lexicographic order."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) < 1:
            raise ValueError("BitVec needs n >= 1")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0/1")

    @property
    def n(self) -> int:
        return len(self.bits)

    @classmethod
    def from_int(cls, value: int, n: int) -> "BitVec":
        if not 0 <= value < (1 << n):
            raise ValueError(f"{value} does not fit in {n} bits")
        return cls(tuple((value >> (n - 1 - i)) & 1 for i in range(n)))

    @classmethod
    def from_str(cls, s: str) -> "BitVec":
        return cls(tuple(int(c) for c in s))

    def to_int(self) -> int:
        v = 0
        for b in self.bits:
            v = (v << 1) | b
        return v

    def __str__(self) -> str:
        return "".join(map(str, self.bits))

    def __xor__(self, other: "BitVec") -> "BitVec":
        if other.n != self.n:
            raise ValueError("length mismatch")
        return BitVec(tuple(a ^ b for a, b in zip(self.bits, other.bits)))


def as_int(x, n: int | None = None) -> int:
    if isinstance(x, BitVec):
        if n is not None and x.n != n:
            raise ValueError(f"expected {n} bits, got {x.n}")
        return x.to_int()
    x = int(x)
    if n is not None and not 0 <= x < (1 << n):
        raise ValueError(f"{x} is not an {n}-bit string")
    return x


def popcount(v: int) -> int:
    return bin(v).count("1")


# ------------------------------------------------------------- seeded streams


@dataclass(frozen=True)
class SeedPath:
    """Hierarchical deterministic seed: identical (root, path) gives an
    identical stream."""

    root: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.root <= MASK64:
            raise ValueError("root must be an unsigned 64-bit integer")
        if any((not isinstance(p, (int, np.integer))) or p < 0 for p in self.path):
            raise ValueError("path entries must be non-negative integers")

    def child(self, *idx: int) -> "SeedPath":
        return SeedPath(self.root, self.path + tuple(int(i) for i in idx))

    def named(self, label: str) -> "SeedPath":
        return self.child(label_index(label))

    def key(self) -> int:
        k = mix64(self.root)
        for p in self.path:
            k = mix64(k ^ mix64(p & MASK64) ^ (p >> 64))
        return k

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))

    def stream(self) -> "Stream":
        return Stream(self.key())

    def digest(self) -> str:
        return f"{self.root:016x}/" + ".".join(map(str, self.path))


def label_index(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=7).digest(), "big")


def digest_int(*parts) -> int:
    """Stable 56-bit digest of a tuple of ints/strings (used as a path index)."""
    h = hashlib.blake2b(repr(parts).encode(), digest_size=7)
    return int.from_bytes(h.digest(), "big")


class Stream:
    """Cheap counter-based stream for scalar draws in Python loops."""

    __slots__ = ("_key", "_ctr")

    def __init__(self, key: int):
        self._key = key & MASK64
        self._ctr = 0

    def next64(self) -> int:
        self._ctr += 1
        return mix64(self._key ^ mix64(self._ctr))

    def uniform(self) -> float:
        return (self.next64() >> 11) * 2.0**-53

    def bit(self) -> int:
        return self.next64() >> 63

    def randbelow(self, m: int) -> int:
        if m <= 0:
            raise ValueError("m must be positive")
        if m & (m - 1) == 0:
            return self.next64() & (m - 1)
        limit = (1 << 64) - ((1 << 64) % m)
        while True:
            v = self.next64()
            if v < limit:
                return v % m

    def bernoulli(self, p: float) -> int:
        return int(self.uniform() < p)


# ------------------------------------------------------------ counted oracles


class CallCounter:
    """Thread-safe evaluation counter."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = 0

    def add(self, k: int = 1) -> None:
        with self._lock:
            self._value += int(k)

    def reset(self) -> None:
        with self._lock:
            self._value = 0

    @property
    def value(self) -> int:
        return self._value

    def __int__(self) -> int:
        return self._value

    def __repr__(self) -> str:
        return f"CallCounter({self._value})"


class PredicateOracle:
    """A predicate on n-bit strings with counted evaluation.

    ``table`` is a uint8 array of length 2**n (tabulated mode).  ``fn`` is a
    vectorized callable on int arrays (callable mode).
    """

    def __init__(self, n: int, table=None, fn: Callable | None = None, name: str = "P"):
        if n < 1:
            raise ValueError("n must be >= 1")
        if (table is None) == (fn is None):
            raise ValueError("give exactly one of table, fn")
        self.n = n
        self.name = name
        self.calls = CallCounter()
        if table is not None:
            table = np.asarray(table, dtype=np.uint8)
            if table.shape != (1 << n,):
                raise ValueError(f"table must have length 2**{n}")
            if table.max(initial=0) > 1:
                raise ValueError("table entries must be bits")
            table.setflags(write=False)
        self._table = table
        self._fn = fn

    @property
    def tabulated(self) -> bool:
        return self._table is not None

    @property
    def table(self) -> np.ndarray:
        if self._table is None:
            raise TypeError("predicate is not tabulated")
        return self._table

    def _raw(self, xs: np.ndarray) -> np.ndarray:
        if self._table is not None:
            return self._table[xs]
        return np.asarray(self._fn(xs), dtype=np.uint8) & 1

    def eval(self, x) -> int:
        x = as_int(x, self.n)
        self.calls.add(1)
        return int(self._raw(np.array([x], dtype=np.int64))[0])

    def eval_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        self.calls.add(xs.size)
        return self._raw(xs)

    def sample(self, seeds: SeedPath) -> tuple[int, int]:
        x = seeds.stream().randbelow(1 << self.n)
        return x, self.eval(x)

    def full_table(self) -> np.ndarray:
        """All 2**n values (counted as 2**n evaluations)."""
        return self.eval_many(np.arange(1 << self.n, dtype=np.int64))

    @classmethod
    def random(cls, n: int, seeds: SeedPath, bias: float = 0.5) -> "PredicateOracle":
        t = (seeds.rng().random(1 << n) < bias).astype(np.uint8)
        return cls(n, table=t, name="random")


# --------------------------------------------------------- monotone functions


class MonotoneFn:
    """A boolean function on k bits together with its representation.

    ``eval`` takes a sequence of k bits.  Coordinate i is bit i of the truth
    table index.  Monotonicity is not enforced here; see ``is_monotone``.
    """

    def __init__(self, k: int, fn: Callable | None = None, table=None, formula=None, name: str = "g"):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.name = name
        self.formula = formula
        self._fn = fn
        self._table = None
        if table is not None:
            table = np.asarray(table, dtype=np.uint8)
            if table.shape != (1 << k,):
                raise ValueError("truth table has the wrong length")
            table.setflags(write=False)
            self._table = table
        if fn is None and table is None and formula is None:
            raise ValueError("need fn, table or formula")
        if formula is not None and formula.k != k:
            raise ValueError("formula arity mismatch")

    def eval(self, bits: Sequence[int]) -> int:
        if len(bits) != self.k:
            raise ValueError(f"expected {self.k} bits")
        if self._table is not None:
            idx = 0
            for i, b in enumerate(bits):
                idx |= (int(b) & 1) << i
            return int(self._table[idx])
        if self.formula is not None:
            from .combiners import formula_eval

            return formula_eval(self.formula, bits)
        return int(self._fn(tuple(int(b) for b in bits))) & 1

    def __call__(self, *bits) -> int:
        if len(bits) == 1 and isinstance(bits[0], (tuple, list, np.ndarray)):
            bits = bits[0]
        return self.eval(bits)

    def truth_table(self) -> np.ndarray:
        if self._table is not None:
            return self._table
        if self.k > MAX_TABLE_ARITY:
            raise ValueError(f"truth tables are capped at k = {MAX_TABLE_ARITY}")
        idx = np.arange(1 << self.k, dtype=np.int64)
        cols = ((idx[:, None] >> np.arange(self.k)) & 1).astype(np.uint8)
        if self.formula is not None:
            from .combiners import formula_eval_batch

            t = formula_eval_batch(self.formula, cols)
        else:
            t = np.fromiter((self._fn(tuple(row)) & 1 for row in cols.tolist()), dtype=np.uint8, count=len(idx))
        t = np.asarray(t, dtype=np.uint8)
        t.setflags(write=False)
        self._table = t
        return t

    def restrict_first(self, b: int) -> "MonotoneFn":
        """g'(u_2..u_k) = g(b, u_2..u_k)."""
        if self.k < 2:
            raise ValueError("cannot restrict a unary function to zero arity")
        t = self.truth_table()
        sub = t[(np.arange(1 << (self.k - 1)) << 1) | (b & 1)]
        return MonotoneFn(self.k - 1, table=sub, name=f"{self.name}|{b}")

    def __repr__(self) -> str:
        return f"MonotoneFn({self.name}, k={self.k})"

    @classmethod
    def AND(cls, k: int) -> "MonotoneFn":
        t = np.zeros(1 << k, dtype=np.uint8)
        t[-1] = 1
        return cls(k, table=t, name=f"AND{k}")

    @classmethod
    def OR(cls, k: int) -> "MonotoneFn":
        t = np.ones(1 << k, dtype=np.uint8)
        t[0] = 0
        return cls(k, table=t, name=f"OR{k}")

    @classmethod
    def threshold(cls, k: int, t: int) -> "MonotoneFn":
        w = np.array([popcount(i) for i in range(1 << k)])
        return cls(k, table=(w >= t).astype(np.uint8), name=f"TH{t}of{k}")

    @classmethod
    def identity(cls) -> "MonotoneFn":
        return cls(1, table=[0, 1], name="id")

    @classmethod
    def constant(cls, k: int, value: int) -> "MonotoneFn":
        return cls(k, table=np.full(1 << k, value & 1, dtype=np.uint8), name=f"const{value}")


def _weight_counts(table: np.ndarray, k: int) -> np.ndarray:
    idx = np.nonzero(table)[0]
    w = np.zeros(len(idx), dtype=np.int64)
    for i in range(k):
        w += (idx >> i) & 1
    return np.bincount(w, minlength=k + 1)


def success_prob_exact(g: MonotoneFn, delta):
    """Pr_{u ~ mu_delta^k}[g(u) = 1], summed exactly.

    Fraction inputs give a Fraction; floats give a float computed from the
    per-weight acceptance counts.
    """
    if g.formula is not None and (g._table is None):
        from .combiners import formula_accept_prob

        return formula_accept_prob(g.formula, delta)
    if g.k > MAX_TABLE_ARITY:
        raise ValueError(f"k = {g.k} > {MAX_TABLE_ARITY} needs a ReadOnceFormula")
    if not 0 <= delta <= 1:
        raise ValueError("delta must be in [0, 1]")
    counts = _weight_counts(g.truth_table(), g.k)
    if isinstance(delta, Fraction):
        return sum((Fraction(int(c)) * delta**w * (1 - delta) ** (g.k - w) for w, c in enumerate(counts)), Fraction(0))
    delta = float(delta)
    return float(sum(int(c) * delta**w * (1 - delta) ** (g.k - w) for w, c in enumerate(counts)))


def is_monotone(g: MonotoneFn) -> int:
    """1 iff flipping any single 0-coordinate to 1 never lowers g."""
    if g.k > MAX_TABLE_ARITY:
        raise ValueError(f"exhaustive check is limited to k <= {MAX_TABLE_ARITY}")
    t = g.truth_table()
    idx = np.arange(1 << g.k)
    for i in range(g.k):
        lo = idx[((idx >> i) & 1) == 0]
        if np.any(t[lo] > t[lo | (1 << i)]):
            return 0
    return 1


# ----------------------------------------------------------------- estimation


@dataclass(frozen=True)
class Estimate:
    """A sampled mean with its Hoeffding half-width at confidence 1 - eta.

    ``value`` is a probability for bit trials; signed trials (range [-1, 1])
    produce signed values with the half-width adjusted for the range.
    """

    value: float
    half_width: float
    confidence: float
    samples: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.samples < 1:
            raise ValueError("samples must be positive")

    @property
    def low(self) -> float:
        return self.value - self.half_width

    @property
    def high(self) -> float:
        return self.value + self.half_width

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "half_width": self.half_width,
            "confidence": self.confidence,
            "samples": self.samples,
        }


def _check_unit_open(name: str, v) -> None:
    if not (isinstance(v, (int, float, Fraction, np.floating)) and 0 < v < 1):
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {v!r}")


def exact_fraction(v) -> Fraction:
    """Fraction with the decimal reading of a float (0.1 -> 1/10)."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    return Fraction(repr(float(v)))


def chernoff_samples(eps, eta) -> int:
    """m = ceil(ln(2/eta) / (2 eps^2)): Hoeffding count for a Bernoulli mean."""
    _check_unit_open("eps", eps)
    _check_unit_open("eta", eta)
    return math.ceil(math.log(2.0 / float(eta)) / (2.0 * float(eps) ** 2))


def range_samples(eps, eta, width: float) -> int:
    """Hoeffding count for a variable with range ``width``."""
    _check_unit_open("eta", eta)
    if not eps > 0:
        raise ValueError("eps must be positive")
    return math.ceil(width**2 * math.log(2.0 / float(eta)) / (2.0 * float(eps) ** 2))


def estimate_probability(trial: Callable[[SeedPath], int], eps, eta, seeds: SeedPath, jobs: int = 1) -> Estimate:
    """Mean of ``trial(seeds.child(j))`` over ``chernoff_samples(eps, eta)``
    trials.  Result is independent of ``jobs``."""
    m = chernoff_samples(eps, eta)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as ex:
            total = sum(ex.map(lambda j: int(trial(seeds.child(j))) & 1, range(m), chunksize=256))
    else:
        total = 0
        for j in range(m):
            total += int(trial(seeds.child(j))) & 1
    return Estimate(total / m, float(eps), 1.0 - float(eta), m)


def estimate_mean_batched(
    batch: Callable[[np.random.Generator, int], np.ndarray],
    eps,
    eta,
    seeds: SeedPath,
    low: float = 0.0,
    high: float = 1.0,
    chunk: int = 1 << 16,
    jobs: int = 1,
) -> Estimate:
    """Vectorized estimator.  ``batch(rng, size)`` returns ``size`` samples in
    [low, high]; chunk ``c`` always uses ``seeds.child(c)``."""
    m = range_samples(eps, eta, high - low)
    sizes = [chunk] * (m // chunk) + ([m % chunk] if m % chunk else [])

    def run(c):
        vals = np.asarray(batch(seeds.child(c).rng(), sizes[c]), dtype=np.float64)
        if vals.shape != (sizes[c],):
            raise ValueError("batch returned the wrong number of samples")
        return float(vals.sum())

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(c) for c in range(len(sizes))]
    return Estimate(math.fsum(parts) / m, float(eps), 1.0 - float(eta), m)


def bernoulli_vec(delta, k: int, seeds: SeedPath) -> tuple[int, ...]:
    """k i.i.d. bits, each 1 with probability delta."""
    if not 0 <= delta <= 1:
        raise ValueError("delta must be in [0, 1]")
    s = seeds.stream()
    d = float(delta)
    return tuple(int(s.uniform() < d) for _ in range(k))


def parallel_map(fn: Callable, items: Iterable, jobs: int = 1) -> list:
    """Order-preserving map; threads when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))
