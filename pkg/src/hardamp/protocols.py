"""Hiding sources, weak bit commitments, the extraction protocol over a
read-once AND/OR formula, hiding and binding experiments, and the reduction
from a protocol adversary to a single-round predictor.

Extraction protocol on committed bits c_1..c_k and input b: walk the formula
bottom-up; an OR gate sets its wire to the XOR of its inputs, an AND gate
draws a fresh wire bit w and sends (w ^ c_i, w ^ c_j).  The last message is
b ^ c_out.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .combiners import AND, OR, ReadOnceFormula, _positional, fold, formula_accept_prob, formula_eval_batch
from .core import (
    PredicateOracle,
    SeedPath,
    estimate_mean_batched,
    exact_fraction,
    mix64,
    mix64_np,
    uniform_from_u64,
)
from .predicate_multi import MultiDistinguisher, MultiMonitor, gen_multi

BOT_Z = 2  # side-information symbol "nothing revealed" in from_beta sources


# ------------------------------------------------------------ hiding sources


class HidingSource:
    """Tabulated joint law of (X, Z): ``joint[x, z]`` are exact Fractions."""

    def __init__(self, joint, labels=None):
        joint = [[Fraction(v) for v in row] for row in joint]
        if len(joint) != 2 or len(joint[0]) != len(joint[1]):
            raise ValueError("joint table must have shape (2, |Z|)")
        if sum(joint[0]) + sum(joint[1]) != 1 or any(v < 0 for row in joint for v in row):
            raise ValueError("joint table must be a probability distribution")
        self.joint = joint
        self.nz = len(joint[0])
        self.labels = list(labels) if labels is not None else list(range(self.nz))
        self._float = np.array([[float(v) for v in row] for row in joint])

    @classmethod
    def from_beta(cls, beta) -> "HidingSource":
        """X uniform; Z is nothing (BOT_Z) with probability beta, else X."""
        b = exact_fraction(beta)
        if not 0 <= b <= 1:
            raise ValueError("beta must be in [0, 1]")
        half = Fraction(1, 2)
        return cls([[half * (1 - b), 0, half * b], [0, half * (1 - b), half * b]], labels=[0, 1, "bot"])

    @classmethod
    def from_tables(cls, f, p) -> "HidingSource":
        """(P(x), f(x)) for uniform x; Z values are relabelled 0..|Z|-1."""
        f = np.asarray(f)
        p = np.asarray(p, dtype=np.uint8)
        zs, inv = np.unique(f, return_inverse=True)
        N = len(f)
        joint = [[Fraction(0)] * len(zs) for _ in range(2)]
        for x in range(N):
            joint[int(p[x])][int(inv[x])] += Fraction(1, N)
        src = cls(joint, labels=[int(z) for z in zs])
        src.z_index = {int(z): i for i, z in enumerate(zs)}
        return src

    def best_success(self) -> Fraction:
        """max_f Pr[f(Z) = X] via the per-z majority."""
        return sum((max(self.joint[0][z], self.joint[1][z]) for z in range(self.nz)), Fraction(0))

    @property
    def delta(self) -> Fraction:
        return 2 * (1 - self.best_success())

    def h_conditional(self) -> list:
        """Pr[H = 1 | X = x, Z = z] = min_x' Pr[x', z] / Pr[x, z] (0 on null cells)."""
        out = [[Fraction(0)] * self.nz for _ in range(2)]
        for z in range(self.nz):
            lo = min(self.joint[0][z], self.joint[1][z])
            for x in (0, 1):
                if self.joint[x][z] > 0:
                    out[x][z] = lo / self.joint[x][z]
        return out

    def pr_h1(self) -> Fraction:
        h = self.h_conditional()
        return sum((self.joint[x][z] * h[x][z] for x in (0, 1) for z in range(self.nz)), Fraction(0))

    def guess_given_h1(self, f) -> Fraction:
        """Pr[f(Z) = X | H = 1] for a guess table f over Z."""
        h = self.h_conditional()
        num = sum((self.joint[x][z] * h[x][z] for z in range(self.nz) for x in (0, 1) if f[z] == x), Fraction(0))
        den = self.pr_h1()
        return num / den if den else Fraction(1, 2)

    def all_guesses_given_h1(self) -> set:
        if self.nz > 16:
            raise ValueError("too many side-information values to enumerate guesses")
        return {self.guess_given_h1(f) for f in itertools.product((0, 1), repeat=self.nz)}

    def likelihood(self, z: np.ndarray) -> np.ndarray:
        """Array (..., 2) proportional to Pr[X = v, Z = z]."""
        return np.moveaxis(self._float[:, np.asarray(z)], 0, -1)

    def sample_z(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Z given X = x using uniforms u, by inverse CDF over the row."""
        rows = self._float / self._float.sum(axis=1, keepdims=True)
        cdf = np.cumsum(rows, axis=1)
        cdf[:, -1] = 1.0
        x = np.asarray(x, dtype=np.int64)
        return (u[..., None] >= cdf[x]).sum(axis=-1)


# ------------------------------------------------------------ weak commitment


@dataclass(frozen=True)
class Commitment:
    z: int
    tag: int
    equivocal: bool


class WeakCommitment:
    """Trusted-party model of an alpha-binding, beta-hiding bit commitment.

    The receiver's view is (z, tag, equivocal): z is BOT_Z with probability
    beta (over the sender's coins) and the bit otherwise; tag binds (b, r_S);
    with probability alpha over the receiver's coins the commitment is
    equivocal and any opening is accepted.
    """

    def __init__(self, alpha: float, beta: float):
        if not (0 <= alpha <= 1 and 0 <= beta <= 1):
            raise ValueError("alpha and beta must lie in [0, 1]")
        self.alpha = alpha
        self.beta = beta

    @staticmethod
    def _tag(b: int, r_s: int) -> int:
        return mix64(r_s ^ mix64(0xC0FFEE + (b & 1)))

    def commit(self, b: int, r_s: int, r_r: int) -> tuple[Commitment, tuple[int, int]]:
        hidden = float(uniform_from_u64(mix64_np(np.uint64(r_s), salt=11))) < self.beta
        eq = float(uniform_from_u64(mix64_np(np.uint64(r_r), salt=12))) < self.alpha
        gamma = Commitment(BOT_Z if hidden else int(b & 1), self._tag(b, r_s), bool(eq))
        return gamma, (int(b & 1), int(r_s))

    def check(self, b: int, gamma: Commitment, tau: tuple[int, int]) -> int:
        if gamma.equivocal:
            return 1
        tb, r_s = tau
        if tb != (b & 1) or self._tag(tb, r_s) != gamma.tag:
            return 0
        return int(gamma.z in (BOT_Z, tb))

    def cheat_open(self, gamma: Commitment, tau: tuple[int, int]) -> tuple[tuple[int, int], tuple[int, int]]:
        """Best double-opening: both bits with the same sender coins (accepted
        for both only when the commitment is equivocal)."""
        return (0, tau[1]), (1, tau[1])

    def double_open_succeeds(self, gamma: Commitment, tau) -> bool:
        o0, o1 = self.cheat_open(gamma, tau)
        return bool(self.check(0, gamma, o0) and self.check(1, gamma, o1))

    @staticmethod
    def cheat_guess(gamma: Commitment, coin: int) -> int:
        return gamma.z if gamma.z != BOT_Z else coin & 1

    def as_source(self) -> HidingSource:
        return HidingSource.from_beta(self.beta)

    def double_open_many(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Vectorized equivocation flags (one per weak commitment)."""
        fr = exact_fraction(self.alpha)
        if fr.denominator <= 1 << 16:
            dt = np.uint8 if fr.denominator <= 256 else np.uint16
            return (rng.integers(0, fr.denominator, size=shape, dtype=dt) < fr.numerator).astype(np.uint8)
        return (rng.random(shape) < self.alpha).astype(np.uint8)


# ------------------------------------------------------- extraction protocol


@dataclass
class ExtractionTranscript:
    masks: tuple  # (c_l ^ c_i, c_l ^ c_j) for every AND gate, traversal order
    final: int

    @property
    def message_count(self) -> int:
        return 2 * len(self.masks) + 1

    def as_dict(self) -> dict:
        return {"masks": [list(m) for m in self.masks], "final": self.final}


def _fresh_bits(r: np.ndarray, extra: tuple, counter: list) -> np.ndarray:
    """Independent bits per (trial, copy), derived from the trial word r."""
    size = int(np.prod(extra, dtype=np.int64)) if extra else 1
    idx = (np.arange(size, dtype=np.uint64) + np.uint64(counter[0])).reshape(extra) if extra else np.uint64(counter[0])
    counter[0] += size
    base = r.reshape(r.shape + (1,) * len(extra))
    return (mix64_np(base ^ mix64_np(idx, salt=31), salt=32) >> np.uint64(63)).astype(np.uint8)


def extraction_batch(g: ReadOnceFormula, c: np.ndarray, b: np.ndarray, r: np.ndarray, keep_wires: bool = True):
    """Run the extraction protocol on B trials.

    c is (B, k) committed bits, b the (B,) inputs, r a (B,) word supplying
    the AND-gate randomness.  Returns (mask list, final (B,), wire list):
    mask entries are (m1, m2) array pairs with shape (B, *copies).
    """
    c = _positional(g, np.asarray(c, dtype=np.uint8))
    r = np.asarray(r, dtype=np.uint64)
    masks: list = []
    wires: list = []
    counter = [0]

    def leaf(col):
        if keep_wires:
            wires.append(col)
        return (col,)

    def gate_fn(op, x, y):
        ci, cj = x[0], y[0]
        if op == OR:
            out = ci ^ cj
        else:
            w = _fresh_bits(r, ci.shape[1:], counter)
            masks.append((w ^ ci, w ^ cj))
            out = w
        if keep_wires:
            wires.append(out)
        return (out,)

    (root,) = fold(g.root, c, leaf, gate_fn)
    final = np.asarray(b, dtype=np.uint8) ^ root
    return masks, final, wires


def run_extraction_protocol(g: ReadOnceFormula, c, b: int, seeds: SeedPath):
    """Single run.  Returns (all 2k-1 wire values in traversal order, transcript)."""
    c = np.asarray(c, dtype=np.uint8).reshape(1, -1)
    if c.shape[1] != g.k:
        raise ValueError(f"expected {g.k} committed bits")
    r = np.array([seeds.stream().next64()], dtype=np.uint64)
    masks, final, wires = extraction_batch(g, c, np.array([b & 1], dtype=np.uint8), r)
    flat_w = [int(v) for w in wires for v in np.asarray(w).reshape(-1)]
    flat_m = []
    for m1, m2 in masks:
        for a, bb in zip(np.asarray(m1).reshape(-1), np.asarray(m2).reshape(-1)):
            flat_m.append((int(a), int(bb)))
    return flat_w, ExtractionTranscript(tuple(flat_m), int(final[0]))


def decode_with_inputs(g: ReadOnceFormula, c: np.ndarray, masks: list, final: np.ndarray) -> np.ndarray:
    """Receiver who knows every c_i: replays the gates and unmasks b."""
    c = _positional(g, np.asarray(c, dtype=np.uint8))
    it = iter(masks)

    def gate_fn(op, x, y):
        if op == OR:
            return (x[0] ^ y[0],)
        m1, _ = next(it)
        return (m1 ^ x[0],)

    (root,) = fold(g.root, c, lambda col: (col,), gate_fn)
    return np.asarray(final, dtype=np.uint8) ^ root


def consistent(g: ReadOnceFormula, c: np.ndarray, masks: list) -> np.ndarray:
    """Opening check: both masks of every AND gate unmask to the same wire."""
    c = _positional(g, np.asarray(c, dtype=np.uint8))
    it = iter(masks)
    ok = [np.ones(c.shape[:-1], dtype=bool)]

    def gate_fn(op, x, y):
        if op == OR:
            return (x[0] ^ y[0],)
        m1, m2 = next(it)
        w1, w2 = m1 ^ x[0], m2 ^ y[0]
        eq = w1 == w2
        ok[0] = ok[0] & eq.reshape(eq.shape[:1] + (-1,)).all(axis=1)
        return (w1,)

    fold(g.root, c, lambda col: (col,), gate_fn)
    return ok[0]


def _norm(a, b):
    s = a + b
    s = np.where(s > 0, s, 1.0)
    return a / s, b / s


def wire_likelihoods(g: ReadOnceFormula, leaf_l: np.ndarray, masks: list, keep_wires: bool = True):
    """Message passing: normalized likelihood pairs (L(0), L(1)) of every
    wire given the view of its subtree.  leaf_l is (B, k, 2)."""
    leaf_l = np.asarray(leaf_l, dtype=np.float64)
    if g.order is not None:
        leaf_l = leaf_l[:, g.order, :]
    arr = np.ascontiguousarray(np.moveaxis(leaf_l, -1, 0))  # (2, B, k): fold wants leaves last
    it = iter(masks)
    wires: list = []

    def leaf(col):
        pair = _norm(col[0], col[1])
        if keep_wires:
            wires.append(pair)
        return pair

    def gate_fn(op, x, y):
        if op == OR:
            a = 0.5 * (x[0] * y[0] + x[1] * y[1])
            b = 0.5 * (x[0] * y[1] + x[1] * y[0])
        else:
            m1, m2 = next(it)
            xi0 = np.where(m1 == 0, x[0], x[1])
            xi1 = np.where(m1 == 0, x[1], x[0])
            yj0 = np.where(m2 == 0, y[0], y[1])
            yj1 = np.where(m2 == 0, y[1], y[0])
            a = 0.25 * xi0 * yj0
            b = 0.25 * xi1 * yj1
        pair = _norm(a, b)
        if keep_wires:
            wires.append(pair)
        return pair

    def leaf_split(a):
        # a has shape (2, B, ...); split the value axis into the tuple
        return leaf((a[0], a[1]))

    root = fold(g.root, arr, leaf_split, gate_fn)
    return root, wires


def posterior_decode(g: ReadOnceFormula, leaf_l: np.ndarray, masks: list, final: np.ndarray):
    """Exact posterior guess of b from (Z_1..Z_k, transcript); returns
    (guess, Pr[b = 1 | view])."""
    (r0, r1), _ = wire_likelihoods(g, leaf_l, masks, keep_wires=False)
    final = np.asarray(final, dtype=np.uint8)
    # b = final ^ c_out
    p1 = np.where(final == 1, r0, r1)
    p0 = np.where(final == 1, r1, r0)
    s = p0 + p1
    post1 = np.where(s > 0, p1 / np.where(s > 0, s, 1), 0.5)
    return (post1 > 0.5).astype(np.uint8), post1


def h_wires(g: ReadOnceFormula, h: np.ndarray) -> list:
    """g evaluated on H bits, every wire in traversal order."""
    h = _positional(g, np.asarray(h, dtype=np.uint8))
    wires: list = []

    def leaf(col):
        wires.append(col)
        return (col,)

    def gate_fn(op, x, y):
        out = (x[0] & y[0]) if op == AND else (x[0] | y[0])
        wires.append(out)
        return (out,)

    fold(g.root, h, leaf, gate_fn)
    return wires


# ------------------------------------------------------------- experiments


def _chunk_for(k: int, chunk: int) -> int:
    # keep roughly 2**21 leaf values in flight
    return max(1, min(chunk, (1 << 21) // k))


def _hoeffding_hw(trials: int, eta: float) -> float:
    return math.sqrt(math.log(2 / eta) / (2 * trials))


def _sample_views(g, source: HidingSource, rng, size):
    k = g.k
    c = rng.integers(0, 2, size=(size, k), dtype=np.uint8)
    z = source.sample_z(c, rng.random((size, k)))
    b = rng.integers(0, 2, size=size, dtype=np.uint8)
    r = rng.integers(0, 1 << 64, size=size, dtype=np.uint64, endpoint=False)
    masks, final, _ = extraction_batch(g, c, b, r, keep_wires=False)
    return c, z, b, masks, final


def hiding_experiment(g: ReadOnceFormula, source: HidingSource, trials: int, seeds: SeedPath, eta: float = 1e-3, chunk: int = 2048) -> dict:
    """Exact bound 1 - Pr[g(H) = 1]/2 on any receiver, against the measured
    success of the exact posterior receiver."""
    if not isinstance(source, HidingSource):
        raise TypeError("hiding_experiment needs a tabulated HidingSource")
    ph = source.pr_h1()
    pg = formula_accept_prob(g, ph)
    bound = 1 - Fraction(pg) / 2
    chunk = _chunk_for(g.k, chunk)
    wins = 0
    for ci, start in enumerate(range(0, trials, chunk)):
        size = min(chunk, trials - start)
        rng = seeds.child(ci).rng()
        c, z, b, masks, final = _sample_views(g, source, rng, size)
        guess, _ = posterior_decode(g, source.likelihood(z), masks, final)
        wins += int((guess == b).sum())
    hw = _hoeffding_hw(trials, eta)
    measured = wins / trials
    return {
        "k": g.k,
        "pr_h1": float(ph),
        "pr_g_h": float(pg),
        "bound": float(bound),
        "eta_k": float((1 - Fraction(pg)) / 2),
        "measured": measured,
        "half_width": hw,
        "trials": trials,
        "within_bound": bool(measured <= float(bound) + hw),
    }


def binding_experiment(g: ReadOnceFormula, weak: WeakCommitment, trials: int, seeds: SeedPath, eta: float = 1e-3, chunk: int = 2048) -> dict:
    """Cheating sender double-opens each round independently (probability
    alpha); it breaks the composed scheme when the pattern satisfies g."""
    exact = formula_accept_prob(g, exact_fraction(weak.alpha))
    chunk = _chunk_for(g.k, chunk) * 4
    wins = 0
    for ci, start in enumerate(range(0, trials, chunk)):
        size = min(chunk, trials - start)
        rng = seeds.child(ci).rng()
        flags = weak.double_open_many(rng, (size, g.k))
        wins += int(formula_eval_batch(g, flags).sum())
    hw = _hoeffding_hw(trials, eta)
    measured = wins / trials
    return {
        "k": g.k,
        "alpha": weak.alpha,
        "exact": float(exact),
        "exact_fraction": f"{exact.numerator}/{exact.denominator}" if exact.denominator < 1 << 256 else None,
        "successes": wins,
        "trials": trials,
        "measured": measured,
        "half_width": hw,
        "within_bound": bool(measured <= float(exact) + hw),
    }


class ComposedCommitment:
    """k sequential weak commitments to fresh bits, then the extraction
    protocol on g.  Opening reveals every per-round opening."""

    def __init__(self, weak: WeakCommitment, g: ReadOnceFormula, seeds: SeedPath):
        self.weak = weak
        self.g = g
        self.seeds = seeds
        self._ctr = 0

    def commit(self, b: int, seeds: SeedPath | None = None):
        s = seeds if seeds is not None else self.seeds.child(self._ctr)
        self._ctr += 1
        k = self.g.k
        st = s.stream()
        c = [st.bit() for _ in range(k)]
        rounds = []
        openings = []
        for i in range(k):
            gamma, tau = self.weak.commit(c[i], st.next64(), st.next64())
            rounds.append(gamma)
            openings.append(tau)
        wires, tx = run_extraction_protocol(self.g, c, b, s.named("extract"))
        view = {"rounds": rounds, "transcript": tx}
        opening = {"b": int(b & 1), "rounds": openings}
        return view, opening

    def check(self, view, opening) -> int:
        rounds, tx = view["rounds"], view["transcript"]
        taus = opening["rounds"]
        c = np.array([[t[0] for t in taus]], dtype=np.uint8)
        for gamma, tau in zip(rounds, taus):
            if not self.weak.check(tau[0], gamma, tau):
                return 0
        masks = _unflatten_masks(self.g, tx.masks)
        if not bool(consistent(self.g, c, masks)[0]):
            return 0
        b = decode_with_inputs(self.g, c, masks, np.array([tx.final], dtype=np.uint8))
        return int(int(b[0]) == opening["b"])


def _unflatten_masks(g: ReadOnceFormula, flat) -> list:
    """Rebuild the per-call mask arrays (batch of one) from a flat list."""
    shapes = []

    def gate_fn(op, x, y):
        if op == AND:
            shapes.append(x[0].shape)
        return (x[0],)

    fold(g.root, np.zeros((1, g.k), dtype=np.uint8), lambda col: (col,), gate_fn)
    out, pos = [], 0
    for sh in shapes:
        size = int(np.prod(sh))
        chunk = flat[pos : pos + size]
        pos += size
        out.append((np.array([m[0] for m in chunk], dtype=np.uint8).reshape(sh), np.array([m[1] for m in chunk], dtype=np.uint8).reshape(sh)))
    return out


def strengthen_commitment(weak: WeakCommitment, g: ReadOnceFormula, seeds: SeedPath) -> ComposedCommitment:
    return ComposedCommitment(weak, g, seeds)


# ------------------------------------------------------------ reduction demo


def planted_reveal_source(n: int, reveal: float, seeds: SeedPath):
    """Random P; f(x) = x on a random ``reveal`` fraction of inputs and a
    single uninformative symbol elsewhere.  Returns (P oracle, f table)."""
    N = 1 << n
    rng = seeds.rng()
    ptab = rng.integers(0, 2, size=N).astype(np.uint8)
    shown = np.zeros(N, dtype=bool)
    shown[rng.permutation(N)[: int(round(reveal * N))]] = True
    f = np.where(shown, np.arange(N), N)
    return PredicateOracle(n, table=ptab, name="planted-P"), f


def protocol_distinguisher(g: ReadOnceFormula, f: np.ndarray, source: HidingSource, adversary=None) -> MultiDistinguisher:
    """C^(k): plays the composed protocol with round i's sender coins x_i and
    committed bit b_i, then outputs 1 iff the adversary recovers the input."""
    k = g.k
    zmap = np.zeros(int(f.max()) + 1, dtype=np.int64)
    for z, i in source.z_index.items():
        zmap[z] = i
    if adversary is None:

        def adversary(z, masks, final):
            return posterior_decode(g, source.likelihood(z), masks, final)[0]

    def fn(xs, bs, r):
        shape = np.broadcast_shapes(r.shape, *(c.shape for c in xs), *(c.shape for c in bs))
        rr = np.broadcast_to(r, shape).reshape(-1)
        cols_x = [np.broadcast_to(c, shape).reshape(-1) for c in xs]
        cols_b = [np.broadcast_to(c, shape).reshape(-1) for c in bs]
        c = np.stack(cols_b, axis=1).astype(np.uint8)
        z = np.stack([zmap[f[cx]] for cx in cols_x], axis=1)
        b_in = (mix64_np(rr, salt=41) >> np.uint64(63)).astype(np.uint8)
        masks, final, _ = extraction_batch(g, c, b_in, mix64_np(rr, salt=42), keep_wires=False)
        out = adversary(z, masks, final) == b_in
        return out.reshape(shape) if shape else out.reshape(())

    return MultiDistinguisher(k, int(np.log2(len(f))), fn, name="protocol-adversary")


def protocol_reduction_demo(
    weak_as_source,
    adversary,
    k: int,
    eps: float,
    seeds: SeedPath,
    g: ReadOnceFormula | None = None,
    claimed_delta: float = 0.8,
    eta: float = 1e-3,
    certify_inputs: int = 3,
) -> dict:
    """Build C^(k) from a protocol adversary; when the adversary beats
    1/2 + eta(k) (eta(k) computed on the claimed hiding), run the predictor
    search and check the extracted predictor exhaustively.

    ``weak_as_source`` is a (P oracle, f table) pair for a one-message
    commitment whose sender coins x fix c = P(x) and reveal f(x)."""
    p, f = weak_as_source
    if g is None:
        from .combiners import from_nested

        g = from_nested([AND, 0, [AND, 1, 2]]) if k == 3 else None
        if g is None:
            raise ValueError("pass g for k != 3")
    if g.k != k:
        raise ValueError("formula arity must equal k")
    source = HidingSource.from_tables(f, p.table)
    pg = formula_accept_prob(g, exact_fraction(claimed_delta))
    eta_k = (1 - Fraction(pg)) / 2
    ck = MultiMonitor(protocol_distinguisher(g, f, source, adversary))
    N = 1 << p.n

    def batch(rng, size):
        r = rng.integers(0, 1 << 64, size=size, dtype=np.uint64, endpoint=False)
        xs = [rng.integers(0, N, size=size) for _ in range(k)]
        bs = [p.table[x] for x in xs]
        return ck.eval_many(xs, bs, r).astype(np.float64)

    adv = estimate_mean_batched(batch, float(eps) / 10, eta, seeds.named("adversary"))
    report = {
        "k": k,
        "true_delta": float(source.delta),
        "claimed_delta": claimed_delta,
        "eta_k": float(eta_k),
        "adversary_success": adv.as_dict(),
        "threshold": 0.5 + float(eta_k),
    }
    if adv.value - adv.half_width <= 0.5 + float(eta_k):
        report["extraction"] = None
        report["obligation"] = False
        return report
    report["obligation"] = True
    q, delta = gen_multi(ck, p, eps, eta, k, seeds.named("extract"))
    succ = q.exact_success(p)
    certs = []
    xs = seeds.named("certify").rng().integers(0, N, size=certify_inputs)
    for x in xs:
        ck.clear()
        q.predict(int(x))
        certs.append(ck.certify(q.slot, q.prefix, int(x)) if not q.coin else True)
    report["extraction"] = {
        "predictor": q.describe(),
        "delta": delta,
        "exact_success": float(succ),
        "beats_one_minus_half_delta": bool(succ >= 1 - Fraction(delta) / 2),
        "gain_target": float(1 - Fraction(delta) / 2 + exact_fraction(eps) / (48 * k)),
        "meets_gain_target": bool(succ >= 1 - Fraction(delta) / 2 + exact_fraction(eps) / (48 * k)),
        "contradicts_claimed_hiding": bool(succ > 1 - exact_fraction(claimed_delta) / 2),
        "non_rewinding": all(certs),
        "certified_predictions": len(certs),
    }
    return report
