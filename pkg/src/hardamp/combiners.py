"""Read-once monotone AND/OR formulas and the amplifier construction.

Formulas are fan-in-2 trees whose leaves are numbered left to right; an
optional ``order`` permutation maps leaf positions to input indices.  Because
leaves carry no index of their own, a layered construction may reuse the same
subtree object for both children of a gate and still be read-once: the two
copies occupy disjoint leaf ranges.  That keeps amplifiers with millions of
leaves down to a few dozen distinct nodes, and exact acceptance probabilities
are computed once per distinct node.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import gmpy2
import numpy as np

from .core import exact_fraction

AND, OR, LEAF_OP = "AND", "OR", "LEAF"
P_STAR = (math.sqrt(5) - 1) / 2


class Node:
    __slots__ = ("op", "left", "right", "k", "depth")

    def __init__(self, op: str, left: "Node | None" = None, right: "Node | None" = None):
        if op == LEAF_OP:
            self.k, self.depth = 1, 0
        else:
            if op not in (AND, OR):
                raise ValueError(f"unknown gate {op!r}")
            self.k = left.k + right.k
            self.depth = 1 + max(left.depth, right.depth)
        self.op, self.left, self.right = op, left, right

    def __repr__(self) -> str:
        return "x" if self.op == LEAF_OP else f"{self.op}(k={self.k})"


LEAF = Node(LEAF_OP)


def gate(op: str, left: Node, right: Node) -> Node:
    return Node(op, left, right)


@dataclass
class ReadOnceFormula:
    root: Node
    order: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.order is not None:
            order = np.asarray(self.order, dtype=np.int64)
            if order.shape != (self.root.k,) or not np.array_equal(np.sort(order), np.arange(self.root.k)):
                raise ValueError("leaf indices must be a permutation of 0..k-1")
            self.order = order

    @property
    def k(self) -> int:
        return self.root.k

    def distinct_nodes(self) -> int:
        seen = set()
        stack = [self.root]
        while stack:
            nd = stack.pop()
            if id(nd) in seen:
                continue
            seen.add(id(nd))
            if nd.op != LEAF_OP:
                stack.extend((nd.left, nd.right))
        return len(seen)

    def count_gates(self) -> dict:
        """Number of AND and OR gates in the expanded tree."""
        memo: dict[int, tuple[int, int]] = {}

        def rec(nd):
            if nd.op == LEAF_OP:
                return (0, 0)
            if id(nd) not in memo:
                a = rec(nd.left)
                b = rec(nd.right)
                memo[id(nd)] = (a[0] + b[0] + (nd.op == AND), a[1] + b[1] + (nd.op == OR))
            return memo[id(nd)]

        a, o = rec(self.root)
        return {AND: a, OR: o}


def _parse_node(obj, leaves: list) -> Node:
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        leaves.append(int(obj))
        return LEAF
    if isinstance(obj, (list, tuple)) and len(obj) == 3 and obj[0] in (AND, OR):
        left = _parse_node(obj[1], leaves)
        right = _parse_node(obj[2], leaves)
        return Node(obj[0], left, right)
    raise ValueError(f"malformed formula element {obj!r}")


def from_nested(obj) -> ReadOnceFormula:
    """Build from the nested-list form ``[gate, left, right]`` / leaf index."""
    leaves: list[int] = []
    root = _parse_node(obj, leaves)
    order = np.array(leaves, dtype=np.int64)
    if not np.array_equal(np.sort(order), np.arange(len(leaves))):
        raise ValueError("not read-once: every index 0..k-1 must appear exactly once")
    if np.array_equal(order, np.arange(len(leaves))):
        order = None
    return ReadOnceFormula(root, order)


def to_nested(f: ReadOnceFormula):
    pos = [0]
    order = f.order

    def rec(nd):
        if nd.op == LEAF_OP:
            j = pos[0]
            pos[0] += 1
            return int(order[j]) if order is not None else j
        return [nd.op, rec(nd.left), rec(nd.right)]

    return rec(f.root)


def serialize(f: ReadOnceFormula) -> str:
    """Text form: JSON nested lists, ``["AND", left, right]`` or a leaf index."""
    return json.dumps(to_nested(f), separators=(",", ":"))


def parse(text: str) -> ReadOnceFormula:
    return from_nested(json.loads(text))


def leaf_indices(f: ReadOnceFormula) -> list[int]:
    """Input index of every leaf, left to right (expands shared nodes)."""
    k = f.k
    return list(range(k)) if f.order is None else [int(i) for i in f.order]


def check_read_once(f: ReadOnceFormula) -> bool:
    """Every input index appears in exactly one leaf and every gate has fan-in 2."""
    idx = leaf_indices(f)
    if sorted(idx) != list(range(f.k)):
        return False
    stack, seen = [f.root], set()
    while stack:
        nd = stack.pop()
        if id(nd) in seen:
            continue
        seen.add(id(nd))
        if nd.op == LEAF_OP:
            continue
        if nd.left is None or nd.right is None or nd.k != nd.left.k + nd.right.k:
            return False
        stack.extend((nd.left, nd.right))
    return True


# ----------------------------------------------------------------- evaluation


def fold(f_root: Node, arr: np.ndarray, leaf_fn: Callable, gate_fn: Callable):
    """Bottom-up evaluation on positional leaf data.

    ``arr`` has the leaf axis last.  ``leaf_fn`` maps ``arr[..., 0]``-shaped
    slices to a tuple of arrays; ``gate_fn(op, x, y)`` combines two such
    tuples.  Shared children are evaluated once on a reshaped view.
    """

    def rec(nd, a):
        if nd.op == LEAF_OP:
            return leaf_fn(a[..., 0])
        L, R = nd.left, nd.right
        if L is R:
            sub = rec(L, a.reshape(a.shape[:-1] + (2, L.k)))
            x = tuple(t[..., 0] for t in sub)
            y = tuple(t[..., 1] for t in sub)
        else:
            x = rec(L, a[..., : L.k])
            y = rec(R, a[..., L.k :])
        return gate_fn(nd.op, x, y)

    return rec(f_root, arr)


def _positional(f: ReadOnceFormula, bits: np.ndarray) -> np.ndarray:
    if f.order is not None:
        bits = bits[..., f.order]
    return np.ascontiguousarray(bits)


def formula_eval_batch(f: ReadOnceFormula, bits) -> np.ndarray:
    """Evaluate on an (..., k) array of bits."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] != f.k:
        raise ValueError(f"expected {f.k} input bits, got {bits.shape[-1]}")
    a = _positional(f, bits)
    (out,) = fold(
        f.root,
        a,
        lambda col: (col,),
        lambda op, x, y: ((x[0] & y[0]) if op == AND else (x[0] | y[0]),),
    )
    return np.asarray(out, dtype=np.uint8)


def formula_eval(f: ReadOnceFormula, bits: Sequence[int]) -> int:
    if len(bits) != f.k:
        raise ValueError(f"expected {f.k} input bits, got {len(bits)}")
    return int(formula_eval_batch(f, np.asarray(bits, dtype=np.uint8)[None, :])[0])


def _compose(root: Node, p, q):
    """(accept, reject) probabilities under i.i.d. leaves, memoized per node.

    Tracking the reject side separately keeps float precision near 1.
    """
    memo: dict[int, tuple] = {}

    def rec(nd):
        if nd.op == LEAF_OP:
            return p, q
        key = id(nd)
        if key not in memo:
            a, qa = rec(nd.left)
            b, qb = rec(nd.right)
            if nd.op == AND:
                memo[key] = (a * b, qa + qb - qa * qb)
            else:
                memo[key] = (a + b - a * b, qa * qb)
        return memo[key]

    return rec(root)


def _to_mpq(p) -> "gmpy2.mpq":
    fr = exact_fraction(p)
    return gmpy2.mpq(fr.numerator, fr.denominator)


def formula_accept_prob(f: ReadOnceFormula, p):
    """Exact Pr[f(u) = 1] for u ~ mu_p^k by gate-wise composition.

    Fraction/int/str inputs return a Fraction (big-rational arithmetic via
    GMP); float inputs return a float.
    """
    if isinstance(p, (float, np.floating)):
        p = float(p)
        if not 0 <= p <= 1:
            raise ValueError("p must be in [0, 1]")
        return float(_compose(f.root, p, 1.0 - p)[0])
    fr = Fraction(p) if isinstance(p, str) else exact_fraction(p)
    if not 0 <= fr <= 1:
        raise ValueError("p must be in [0, 1]")
    q = gmpy2.mpq(fr.numerator, fr.denominator)
    acc, _ = _compose(f.root, q, 1 - q)
    return Fraction(int(acc.numerator), int(acc.denominator))


def formula_accept_bounds(f: ReadOnceFormula, p, prec: int = 256) -> dict:
    """Rigorous enclosures of the accept and reject probabilities.

    Uses outward-rounded binary floating point, for formulas too large for
    exact rationals.  The gate rules are written with nonnegative terms only
    (AND: acc = a*b, rej = ra + rb*a; OR: acc = a + b*ra, rej = ra*rb), so
    rounding each operation outward keeps the enclosure valid.
    """
    fr = exact_fraction(p)
    if not 0 <= fr <= 1:
        raise ValueError("p must be in [0, 1]")
    down = gmpy2.context(precision=prec, round=gmpy2.RoundDown)
    up = gmpy2.context(precision=prec, round=gmpy2.RoundUp)

    def ratio(num, ctx):
        with ctx:
            return gmpy2.mpfr(num) / gmpy2.mpfr(fr.denominator)

    base = (ratio(fr.numerator, down), ratio(fr.numerator, up),
            ratio(fr.denominator - fr.numerator, down), ratio(fr.denominator - fr.numerator, up))
    memo: dict[int, tuple] = {}

    def rec(nd):
        if nd.op == LEAF_OP:
            return base
        key = id(nd)
        if key not in memo:
            a_lo, a_hi, ra_lo, ra_hi = rec(nd.left)
            b_lo, b_hi, rb_lo, rb_hi = rec(nd.right)
            if nd.op == AND:
                with down:
                    acc_lo, rej_lo = a_lo * b_lo, ra_lo + rb_lo * a_lo
                with up:
                    acc_hi, rej_hi = a_hi * b_hi, ra_hi + rb_hi * a_hi
            else:
                with down:
                    acc_lo, rej_lo = a_lo + b_lo * ra_lo, ra_lo * rb_lo
                with up:
                    acc_hi, rej_hi = a_hi + b_hi * ra_hi, ra_hi * rb_hi
            memo[key] = (acc_lo, acc_hi, rej_lo, rej_hi)
        return memo[key]

    acc_lo, acc_hi, rej_lo, rej_hi = rec(f.root)
    return {"accept_lo": acc_lo, "accept_hi": acc_hi, "reject_lo": rej_lo, "reject_hi": rej_hi}


def enumerate_accept_prob(f: ReadOnceFormula, p) -> Fraction:
    """Brute-force sum over all 2^k inputs (k <= 20), exact."""
    k = f.k
    if k > 20:
        raise ValueError("enumeration is limited to k <= 20")
    fr = exact_fraction(p)
    counts = np.zeros(k + 1, dtype=np.int64)
    block = 1 << min(k, 16)
    for start in range(0, 1 << k, block):
        idx = np.arange(start, min(start + block, 1 << k), dtype=np.int64)
        bits = ((idx[:, None] >> np.arange(k)) & 1).astype(np.uint8)
        acc = formula_eval_batch(f, bits).astype(bool)
        w = bits.sum(axis=1)[acc]
        counts += np.bincount(w, minlength=k + 1)
    return sum((Fraction(int(c)) * fr**w * (1 - fr) ** (k - w) for w, c in enumerate(counts)), Fraction(0))


# ------------------------------------------------------------------ builders


def gadget_map(q: float) -> float:
    """Acceptance map of OR(AND(x1,x2), AND(x3,x4))."""
    return 1 - (1 - q * q) ** 2


def valiant_gadget(sub: Node = LEAF) -> Node:
    a = gate(AND, sub, sub)
    return gate(OR, a, a)


def tower(op: str, sub: Node, width: int) -> Node:
    """Balanced op-tree over ``width`` copies of ``sub`` (shared where equal)."""
    if width < 1:
        raise ValueError("width must be >= 1")
    memo: dict[int, Node] = {1: sub}

    def rec(w):
        if w not in memo:
            memo[w] = gate(op, rec(w // 2), rec(w - w // 2))
        return memo[w]

    return rec(width)


class AmplifierError(ValueError):
    pass


# pre-balancing moves: attach a fresh leaf, or combine two copies
_PRE_OPS = ("and_leaf", "or_leaf", "and_copy", "or_copy")


def _pre_step(op, s, al, be):
    (a, qa), (b, qb) = s
    (pa, qpa), (pb, qpb) = (al, 1 - al), (be, 1 - be)
    if op == "and_leaf":
        return ((a * pa, qa + qpa - qa * qpa), (b * pb, qb + qpb - qb * qpb)), 1
    if op == "or_leaf":
        return ((a + pa - a * pa, qa * qpa), (b + pb - b * pb, qb * qpb)), 1
    if op == "and_copy":
        return ((a * a, qa + qa - qa * qa), (b * b, qb + qb - qb * qb)), 2
    return ((a + a - a * a, qa * qa), (b + b - b * b, qb * qb)), 2


def _gadget_pair(p, q):
    # AND then OR on copies, tracking (p, 1-p)
    p2, q2 = p * p, 2 * q - q * q
    return 2 * p2 - p2 * p2, q2 * q2


def _tower_finish(a, qa, b, qb, t, max_mult):
    """Smallest width multiplier (w1 * w2) of an OR^{w2}-of-AND^{w1} tower (or
    its dual) taking (a, b) past (t, 1-t).  Returns (mult, kind, w1, w2)."""
    best = None
    for dual in (False, True):
        # the dual swaps the roles of accept and reject
        x, qx, y, qy = (a, qa, b, qb) if not dual else (qb, b, qa, a)
        if x <= 0:
            lx = -math.inf
        else:
            lx = math.log(x)
        ly = math.log1p(-qy) if qy < 1 else -math.inf
        for w1 in range(1, 65):
            a1 = math.exp(w1 * lx) if lx > -math.inf else 0.0
            qb1 = -math.expm1(w1 * ly) if ly > -math.inf else 1.0
            # choose w2: need qb1^w2 < t and 1-(1-a1)^w2 < t
            if qb1 <= 0:
                w2 = 1
            elif qb1 >= 1:
                continue
            else:
                w2 = max(1, math.floor(math.log(t) / math.log(qb1)) + 1)
            acc = -math.expm1(w2 * math.log1p(-a1)) if a1 < 1 else 1.0
            if acc < t and (qb1**w2 if qb1 > 0 else 0.0) < t:
                mult = w1 * w2
                if mult <= max_mult and (best is None or mult < best[0]):
                    best = (mult, "or-of-and" if not dual else "and-of-or", w1, w2)
    return best


def _plan(al, be, target, max_k):
    """Search pre-balancing sequences, gadget depth and final towers for the
    smallest leaf count.  Float planning only; the result is validated
    exactly afterwards."""
    start = ((al, 1 - al), (be, 1 - be))
    frontier = [((), start, 1)]
    plans = []
    first_straddle = None
    for depth in range(0, 9):
        cand = []
        for seq, s, k in frontier:
            (a, qa), (b, qb) = s
            straddle = a < P_STAR < b
            if straddle and first_straddle is None:
                first_straddle = depth
            cand.append((seq, s, k, straddle))
        for seq, s, k, straddle in cand:
            cur, kk = s, k
            for g in range(0, 64):
                if kk > max_k:
                    break
                (a, qa), (b, qb) = cur
                fin = _tower_finish(a, qa, b, qb, target, max_k // kk)
                if fin is not None:
                    plans.append((kk * fin[0], seq, g, fin))
                if not straddle:
                    break
                cur = (_gadget_pair(a, qa), _gadget_pair(b, qb))
                kk *= 4
        if first_straddle is not None and depth >= first_straddle + 2:
            break
        nxt = []
        for seq, s, k in frontier:
            for op in _PRE_OPS:
                s2, grow = _pre_step(op, s, al, be)
                k2 = k + grow if grow == 1 else k * 2
                if k2 <= max_k:
                    nxt.append((seq + (op,), s2, k2))
        frontier = nxt
    plans.sort(key=lambda t: (t[0], len(t[1]), t[2]))
    return plans


def _realize(seq, gadgets, fin) -> Node:
    nd = LEAF
    for op in seq:
        if op == "and_leaf":
            nd = gate(AND, nd, LEAF)
        elif op == "or_leaf":
            nd = gate(OR, nd, LEAF)
        elif op == "and_copy":
            nd = gate(AND, nd, nd)
        else:
            nd = gate(OR, nd, nd)
    for _ in range(gadgets):
        nd = valiant_gadget(nd)
    mult, kind, w1, w2 = fin
    inner, outer = (AND, OR) if kind == "or-of-and" else (OR, AND)
    if w1 > 1:
        nd = tower(inner, nd, w1)
    if w2 > 1:
        nd = tower(outer, nd, w2)
    return nd


EXACT_LEAF_LIMIT = 1 << 22


def certify(f: ReadOnceFormula, alpha, beta, bound: Fraction) -> dict:
    """Check Pr[f(mu_alpha)=1] < bound and Pr[f(mu_beta)=1] > 1 - bound.

    Exact rationals up to EXACT_LEAF_LIMIT leaves, outward-rounded bounds
    beyond that.
    """
    if f.k <= EXACT_LEAF_LIMIT:
        pa = formula_accept_prob(f, exact_fraction(alpha))
        pb = formula_accept_prob(f, exact_fraction(beta))
        return {
            "mode": "exact",
            "accept_alpha": pa,
            "accept_beta": pb,
            "ok": pa < bound and pb > 1 - bound,
        }
    ea = formula_accept_bounds(f, alpha)
    eb = formula_accept_bounds(f, beta)
    # bound = 2^-n is a dyadic, so the mpfr comparison is exact
    bd = gmpy2.mpfr(bound)
    return {
        "mode": "interval",
        "accept_alpha": float(ea["accept_hi"]),
        "accept_beta": 1 - float(eb["reject_hi"]),
        "ok": bool(ea["accept_hi"] < bd and eb["reject_hi"] < bd),
    }


def build_amplifier(alpha, beta, n_target: int, max_k: int = 10**6, gap_floor: float = 0.01, margin_bits: int | None = None) -> ReadOnceFormula:
    """Read-once formula g with Pr[g(mu_alpha)=1] < 2^-n and
    Pr[g(mu_beta)=1] > 1 - 2^-n.

    The planner targets 2^-(n + margin_bits) (default margin: n more bits) and
    the certificate is checked against 2^-n.  The float planner chooses the
    layer sequence; every accepted build is certified afterwards.
    """
    a_fr, b_fr = exact_fraction(alpha), exact_fraction(beta)
    if not (0 <= a_fr < b_fr <= 1):
        raise AmplifierError("need 0 <= alpha < beta <= 1")
    if b_fr - a_fr < exact_fraction(gap_floor):
        raise AmplifierError(f"gap beta - alpha = {float(b_fr - a_fr)} is below the floor {gap_floor}")
    if n_target < 1:
        raise AmplifierError("n_target must be >= 1")
    if margin_bits is None:
        margin_bits = n_target
    bound = Fraction(1, 1 << n_target)
    target = 2.0 ** -(n_target + margin_bits)
    plans = _plan(float(a_fr), float(b_fr), target, max_k)
    if not plans:
        raise AmplifierError(
            f"no construction within max_k = {max_k} leaves for alpha={float(a_fr)}, beta={float(b_fr)}, "
            f"n_target={n_target}, margin_bits={margin_bits}"
        )
    for k_est, seq, g, fin in plans[:20]:
        nd = _realize(seq, g, fin)
        f = ReadOnceFormula(nd)
        cert = certify(f, a_fr, b_fr, bound)
        if cert["ok"]:
            f.info = {
                "alpha": str(a_fr),
                "beta": str(b_fr),
                "n_target": n_target,
                "margin_bits": margin_bits,
                "k": f.k,
                "pre_balance": list(seq),
                "gadget_layers": g,
                "tower": {"kind": fin[1], "w_inner": fin[2], "w_outer": fin[3]},
                "certificate": cert["mode"],
                "accept_alpha": cert["accept_alpha"],
                "accept_beta": cert["accept_beta"],
            }
            return f
    raise AmplifierError("planned constructions failed exact validation")
