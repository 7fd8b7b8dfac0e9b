"""Weakly verifiable puzzles, g-combined puzzles, surplus estimation and the
recursive solver generator with its retry solver.

Everything runs on batches of independent trials.  A poser maps poser
randomness (an array of n-bit words) to (instances, secrets); the verifier is
a pure function of (secret, answer) and is never handed to a solver.  A
solver is a pair of pure functions on explicit state:

    state = solver.initial_state(size, rng)
    answers, state = solver.step(state, instances, rng)

States are never mutated in place, so snapshot and restore are free.  An
answer of BOT (-1) never verifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    CallCounter,
    Estimate,
    MonotoneFn,
    SeedPath,
    estimate_mean_batched,
    exact_fraction,
    is_monotone,
    mix64_np,
    success_prob_exact,
    uniform_from_u64,
)

BOT = -1


# ----------------------------------------------------------------- posers


class GuessingPuzzle:
    """Answer uniform in ``answers`` values; with probability ``leak`` the
    instance shows the answer, otherwise it shows BOT.  Poser randomness is
    an n-bit word."""

    def __init__(self, answers: int = 4, leak: float = 0.0, n: int = 16):
        if answers < 1 or not 0 <= leak <= 1:
            raise ValueError("bad puzzle parameters")
        self.answers = answers
        self.leak = leak
        self.n = n
        self.poses = CallCounter()

    def pose(self, pis):
        pis = np.asarray(pis, dtype=np.uint64)
        self.poses.add(pis.size)
        secret = (mix64_np(pis, salt=1) % np.uint64(self.answers)).astype(np.int64)
        shown = uniform_from_u64(mix64_np(pis, salt=2)) < self.leak
        return np.where(shown, secret, BOT), secret

    @staticmethod
    def verify(secret, answer) -> np.ndarray:
        return (np.asarray(answer) == np.asarray(secret)).astype(np.uint8)

    def random_pis(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.integers(0, 1 << self.n, size=shape, dtype=np.uint64)

    def optimal_success(self) -> Fraction:
        """Best single-puzzle success: read the leak, else guess."""
        f = exact_fraction(self.leak)
        return f + (1 - f) / self.answers


@dataclass
class CombinedPoser:
    base: GuessingPuzzle
    g: MonotoneFn
    k: int

    def __post_init__(self):
        if self.g.k != self.k:
            raise ValueError("g has the wrong arity")
        self._table = self.g.truth_table()

    def pose(self, pis):
        """pis has shape (B, k); returns (instances, secrets) of that shape."""
        pis = np.asarray(pis, dtype=np.uint64)
        return self.base.pose(pis)

    def outcomes(self, secrets, answers) -> np.ndarray:
        return self.base.verify(secrets, answers)

    def verify(self, secrets, answers) -> np.ndarray:
        return self.g_of(self.outcomes(secrets, answers))

    def g_of(self, cs: np.ndarray) -> np.ndarray:
        idx = np.zeros(cs.shape[0], dtype=np.int64)
        for i in range(cs.shape[1]):
            idx |= cs[:, i].astype(np.int64) << i
        return self._table[idx]

    def baseline(self, delta):
        return success_prob_exact(self.g, delta)


def combine(base: GuessingPuzzle, g: MonotoneFn, k: int) -> CombinedPoser:
    if g.k <= 20 and not is_monotone(g):
        raise ValueError("g must be monotone")
    return CombinedPoser(base, g, k)


# ----------------------------------------------------------------- solvers


class PuzzleSolver:
    """Base class: state is a dict of arrays, one row per trial."""

    name = "solver"

    def __init__(self):
        self.calls = CallCounter()

    def initial_state(self, size: int, rng: np.random.Generator) -> dict:
        return {"pos": np.zeros(size, dtype=np.int64)}

    def answer(self, state: dict, instances: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def step(self, state: dict, instances, rng):
        instances = np.asarray(instances, dtype=np.int64)
        self.calls.add(instances.size)
        ans = self.answer(state, instances, rng)
        new = dict(state)
        new["pos"] = state["pos"] + 1
        return ans, new


class GuessSolver(PuzzleSolver):
    """Uniform guess, ignoring the instance."""

    name = "guess"

    def __init__(self, answers: int):
        super().__init__()
        self.answers = answers

    def answer(self, state, instances, rng):
        return rng.integers(0, self.answers, size=instances.shape)


class HintSolver(PuzzleSolver):
    """Copies a leaked answer when shown, else guesses.  ``positions``
    restricts hint use to those 0-based slots (None: all slots)."""

    name = "hint"

    def __init__(self, answers: int, positions=None):
        super().__init__()
        self.answers = answers
        self.positions = None if positions is None else tuple(positions)

    def answer(self, state, instances, rng):
        guess = rng.integers(0, self.answers, size=instances.shape)
        use = instances != BOT
        if self.positions is not None:
            use &= np.isin(state["pos"], self.positions)
        return np.where(use, instances, guess)


class ConstantSolver(PuzzleSolver):
    name = "constant"

    def __init__(self, value: int = 0):
        super().__init__()
        self.value = value

    def answer(self, state, instances, rng):
        return np.full(instances.shape, self.value, dtype=np.int64)


class PrefixedSolver(PuzzleSolver):
    """C': first solves a simulated puzzle posed with fixed randomness pi*,
    then carries on as the inner solver on the remaining puzzles."""

    def __init__(self, inner: PuzzleSolver, pi_star: int, base: GuessingPuzzle):
        super().__init__()
        self.inner = inner
        self.pi_star = int(pi_star)
        self.base = base
        self.calls = inner.calls
        self.name = f"prefixed({inner.name})"

    def initial_state(self, size, rng):
        st = self.inner.initial_state(size, rng)
        inst, _ = self.base.pose(np.full(size, self.pi_star, dtype=np.uint64))
        _, st = self.inner.step(st, inst, rng)
        return st

    def step(self, state, instances, rng):
        return self.inner.step(state, instances, rng)


def run_combined(solver: PuzzleSolver, comb: CombinedPoser, pis: np.ndarray, rng: np.random.Generator):
    """Sequential interaction; returns (answers, per-coordinate outcomes)."""
    inst, secret = comb.pose(pis)
    B, k = pis.shape
    st = solver.initial_state(B, rng)
    ans = np.empty((B, k), dtype=np.int64)
    for i in range(k):
        ans[:, i], st = solver.step(st, inst[:, i], rng)
    return ans, comb.outcomes(secret, ans)


# ----------------------------------------------------------------- surplus


@dataclass
class SurplusRecord:
    pi_star: int
    b: int
    value: Estimate
    conditional: float
    baseline: Fraction

    def as_dict(self) -> dict:
        return {
            "pi_star": self.pi_star,
            "b": self.b,
            "value": self.value.as_dict(),
            "conditional": self.conditional,
            "baseline": float(self.baseline),
        }


def _restricted_baseline(g: MonotoneFn, b: int, delta) -> Fraction:
    d = delta if isinstance(delta, Fraction) else exact_fraction(delta)
    return success_prob_exact(g.restrict_first(b), d)


def surplus_pair(c: PuzzleSolver, comb: CombinedPoser, pi_star: int, eps, delta, eta, seeds: SeedPath) -> tuple[SurplusRecord, SurplusRecord]:
    """Both surpluses from shared trials, each within eps/4k."""
    k = comb.k
    table = comb.g.truth_table()
    hw = float(eps) / (4 * k)

    def batch_for(b):
        def batch(rng, size):
            pis = comb.base.random_pis(rng, (size, k))
            pis[:, 0] = pi_star
            _, cs = run_combined(c, comb, pis, rng)
            idx = np.full(size, b, dtype=np.int64)
            for i in range(1, k):
                idx |= cs[:, i].astype(np.int64) << i
            return table[idx]

        return batch

    # same seeds for both b, so both events are read off identical runs
    out = []
    for b in (0, 1):
        est = estimate_mean_batched(batch_for(b), hw, eta, seeds)
        base = _restricted_baseline(comb.g, b, delta)
        val = Estimate(est.value - float(base), est.half_width, est.confidence, est.samples)
        out.append(SurplusRecord(int(pi_star), b, val, est.value, base))
    return out[0], out[1]


def surplus(c: PuzzleSolver, comb: CombinedPoser, pi_star: int, b: int, eps, eta, seeds: SeedPath, delta=None) -> SurplusRecord:
    """S_{pi*, b}: conditional probability that the outcome vector lands in
    G_b (first coordinate replaced by b) minus the exact mu_delta baseline."""
    if b not in (0, 1):
        raise ValueError("b must be a bit")
    if delta is None:
        raise ValueError("delta is required for the baseline")
    pair = surplus_pair(c, comb, pi_star, eps, delta, eta, seeds)
    return pair[b]


# ----------------------------------------------------------------- solver D


@dataclass
class LiveSession:
    """The live single puzzle: D may read it, never see its verifier."""

    instances: np.ndarray
    reads: int = 0

    def read(self) -> np.ndarray:
        self.reads += 1
        return self.instances


@dataclass
class SolveRecord:
    live_reads: int
    slot: int
    prefix: tuple
    phase2_runs: int
    max_phase2_per_trial: int
    simulated_poses: int
    bottoms: int


class SolverD:
    """Generated solver for one live puzzle.

    ``mode`` is "pass-through" (run the prefixed C and return its answer) or
    "retry" (phase 1 on the live puzzle, then up to ``retry_budget``
    simulated phase-2 runs looking for an outcome vector in G_1 minus G_0).
    """

    def __init__(self, inner: PuzzleSolver, base: GuessingPuzzle, g: MonotoneFn, mode: str, fixed_prefix: tuple, retry_budget: int | None, diagnostics: dict):
        self.inner = inner
        self.base = base
        self.g = g
        self.mode = mode
        self.fixed_prefix = fixed_prefix
        self.retry_budget = retry_budget
        self.diagnostics = diagnostics
        self.transcript: list[SolveRecord] = []
        if mode == "retry":
            t = g.truth_table()
            idx = np.arange(1 << g.k)
            # G_1 minus G_0 as a table over the last k-1 coordinates
            rest = idx[(idx & 1) == 0] >> 1
            self._pivotal = (t[(rest << 1) | 1] == 1) & (t[rest << 1] == 0)

    def solve(self, session: LiveSession, rng: np.random.Generator) -> np.ndarray:
        poses_before = self.base.poses.value
        st = self.inner.initial_state(len(session.instances), rng)
        y1, st = self.inner.step(st, session.read(), rng)
        if self.mode != "retry":
            self._log(session, np.zeros(len(y1), dtype=np.int64), poses_before, 0)
            return y1
        return self._retry(session, y1, st, rng, poses_before)

    def _phase2(self, st, size, rng):
        """One simulated run of the remaining k-1 puzzles from a snapshot."""
        km1 = self.g.k - 1
        pis = self.base.random_pis(rng, (size, km1))
        inst, secret = self.base.pose(pis)
        idx = np.zeros(size, dtype=np.int64)
        for i in range(km1):
            ans, st = self.inner.step(st, inst[:, i], rng)
            idx |= self.base.verify(secret[:, i], ans).astype(np.int64) << i
        return self._pivotal[idx]

    def _retry(self, session, y1, snapshot, rng, poses_before):
        B = len(y1)
        done = np.zeros(B, dtype=bool)
        runs = np.zeros(B, dtype=np.int64)
        for _ in range(self.retry_budget):
            live = np.nonzero(~done)[0]
            if live.size == 0:
                break
            sub = {key: val[live] for key, val in snapshot.items()}
            hit = self._phase2(sub, live.size, rng)
            runs[live] += 1
            done[live[hit]] = True
        out = np.where(done, y1, BOT)
        self._log(session, runs, poses_before, int((~done).sum()))
        return out

    def _log(self, session, runs, poses_before, bottoms):
        self.transcript.append(
            SolveRecord(
                live_reads=session.reads,
                slot=len(self.fixed_prefix) + 1,
                prefix=self.fixed_prefix,
                phase2_runs=int(runs.sum()),
                max_phase2_per_trial=int(runs.max(initial=0)),
                simulated_poses=self.base.poses.value - poses_before,
                bottoms=bottoms,
            )
        )


def check_non_rewinding(d: SolverD) -> dict:
    """One live read per solve, one slot and prefix throughout, and retries
    within budget."""
    if not d.transcript:
        raise ValueError("solver has not run yet")
    slots = {r.slot for r in d.transcript}
    prefixes = {r.prefix for r in d.transcript}
    reads = [r.live_reads for r in d.transcript]
    budget = d.retry_budget or 0
    over = [r.max_phase2_per_trial for r in d.transcript if r.max_phase2_per_trial > budget]
    violations = []
    if any(v != 1 for v in reads):
        violations.append("live puzzle read more than once")
    if len(slots) != 1 or len(prefixes) != 1:
        violations.append("slot or prefix changed between solves")
    if over:
        violations.append("retry budget exceeded")
    return {
        "solves": len(d.transcript),
        "live_reads": reads,
        "slot": next(iter(slots)),
        "phase2_runs": sum(r.phase2_runs for r in d.transcript),
        "simulated_poses": sum(r.simulated_poses for r in d.transcript),
        "retry_budget": d.retry_budget,
        "violations": violations,
        "non_rewinding": not violations,
    }


def candidate_count(k: int, eps, n: int) -> int:
    """(6k/eps) ln n, rounded up."""
    return math.ceil(6 * k / float(eps) * math.log(n))


def retry_budget(k: int, eps) -> int:
    """(6k/eps) ln(6k/eps), rounded up."""
    a = 6 * k / float(eps)
    return math.ceil(a * math.log(a))


def gen_puzzle_solver(c: PuzzleSolver, base: GuessingPuzzle, g: MonotoneFn, eps, delta, n: int, eta, seeds: SeedPath) -> SolverD:
    """Recursive generator.  At each level with arity k > 1, sample
    candidates pi* and estimate both surpluses; a surplus of at least
    (1 - 3/4k) eps fixes (pi*, b) and recurses on g(b, ...) with
    (1 - 1/k) eps.  Otherwise emit the retry solver."""
    if not 0 < float(eps) < 1:
        raise ValueError("eps must lie in (0, 1)")
    if g.k <= 20 and not is_monotone(g):
        raise ValueError("g must be monotone")
    diag: dict = {"eps": float(eps), "delta": float(delta), "k": g.k, "levels": []}
    # precondition check: C beats the mu_delta baseline by eps
    comb0 = CombinedPoser(base, g, g.k)
    pre = measure_success(c, comb0, float(eps) / 4, eta, seeds.named("precondition"))
    base0 = float(comb0.baseline(exact_fraction(delta)))
    diag["precondition"] = {"measured": pre.as_dict(), "baseline": base0, "holds": bool(pre.value + pre.half_width >= base0 + float(eps))}

    cur_c, cur_g, cur_eps = c, g, exact_fraction(eps)
    fixed: list[tuple[int, int]] = []
    level = 0
    while cur_g.k > 1:
        k = cur_g.k
        comb = CombinedPoser(base, cur_g, k)
        n_cand = candidate_count(k, cur_eps, n)
        thresh = (1 - Fraction(3, 4 * k)) * cur_eps
        lvl_seed = seeds.named("level").child(level)
        crng = lvl_seed.named("candidates").rng()
        record = {"k": k, "eps": float(cur_eps), "candidates_budget": n_cand, "threshold": float(thresh)}
        found = None
        tried = 0
        for t in range(n_cand):
            pi_star = int(base.random_pis(crng, ()))
            tried += 1
            s0, s1 = surplus_pair(cur_c, comb, pi_star, cur_eps, delta, eta, lvl_seed.child(t))
            for rec in (s0, s1):
                if rec.value.value >= float(thresh):
                    found = rec
                    break
            if found is not None:
                break
        record["candidates_tried"] = tried
        if found is None:
            budget = retry_budget(k, cur_eps)
            record.update(branch="retry", retry_budget=budget)
            diag["levels"].append(record)
            diag["final_eps"] = float(cur_eps)
            return SolverD(cur_c, base, cur_g, "retry", tuple(fixed), budget, diag)
        record.update(branch="recurse", pi_star=found.pi_star, b=found.b, surplus=found.value.as_dict())
        diag["levels"].append(record)
        fixed.append((found.pi_star, found.b))
        cur_c = PrefixedSolver(cur_c, found.pi_star, base)
        cur_g = cur_g.restrict_first(found.b)
        cur_eps = (1 - Fraction(1, k)) * cur_eps
        level += 1
    diag["final_eps"] = float(cur_eps)
    return SolverD(cur_c, base, cur_g, "pass-through", tuple(fixed), None, diag)


def measure_success(s, poser, eps, eta, seeds: SeedPath) -> Estimate:
    """Monte-Carlo Pr[verifier accepts]; BOT counts as failure."""
    if isinstance(s, SolverD):
        base = poser.base if isinstance(poser, CombinedPoser) else poser

        def batch(rng, size):
            pis = base.random_pis(rng, size)
            inst, secret = base.pose(pis)
            return base.verify(secret, s.solve(LiveSession(inst), rng))

    elif isinstance(poser, CombinedPoser):

        def batch(rng, size):
            pis = poser.base.random_pis(rng, (size, poser.k))
            _, cs = run_combined(s, poser, pis, rng)
            return poser.g_of(cs)

    else:

        def batch(rng, size):
            pis = poser.random_pis(rng, size)
            inst, secret = poser.pose(pis)
            st = s.initial_state(size, rng)
            ans, _ = s.step(st, inst, rng)
            return poser.verify(secret, ans)

    return estimate_mean_batched(batch, eps, eta, seeds)
