"""Adversarial instance families.

* ``f1``: two BXOS valuations with a planted complementary clause pair of
  half-size clauses hidden among ``t`` random clauses that are each slightly
  larger.  Any (k, alpha)-sketch with alpha <= 1/2 prefers the random
  clauses, so sketch-based best-known protocols stay near 23/32 of optimum.
* ``appendix-g``: the hidden-bit distribution behind the simultaneous lower
  bound.  A planted pair either covers every item (``M = 1``) or coincides
  (``M = 0``); every other clause follows the same marginal law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import DimensionError
from .sketch import SketchParams, compute_sketch, swap_gains
from .valuations import Instance, Valuation, cross_min_gram
from .welfare import pair_welfare_matrix

__all__ = [
    "F1Params",
    "ConditionResult",
    "F1Instance",
    "F1ExclusionReport",
    "gen_f1",
    "check_f1_conditions",
    "verify_f1_exclusion",
    "GInstance",
    "gen_appendix_g",
    "appendix_g_pair_moments",
    "GStats",
    "stats_appendix_g",
    "f1_to_instance",
    "g_to_instance",
]

_ROW_CHUNK = 64


def _fraction(x) -> Fraction:
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


# -- F1 -------------------------------------------------------------------------------


@dataclass(frozen=True)
class F1Params:
    epsilon: Fraction
    m: int

    def __post_init__(self):
        eps = _fraction(self.epsilon)
        if not 0 < eps < Fraction(1, 8):
            raise ValueError(f"epsilon must lie in (0, 1/8), got {eps}")
        if self.m <= 0 or self.m % 4:
            raise DimensionError(f"m must be a positive multiple of 4, got {self.m}")
        object.__setattr__(self, "epsilon", eps)

    @property
    def gamma(self) -> float:
        return 5 / 8 + math.sqrt(3) / 8

    @property
    def t(self) -> int:
        return math.ceil(128 / self.epsilon)

    @property
    def blocks(self) -> tuple[range, ...]:
        q = self.m // 4
        return tuple(range(b * q, (b + 1) * q) for b in range(4))

    @property
    def p(self) -> tuple[float, ...]:
        g, e = self.gamma, float(self.epsilon)
        return (5 / 4 - g + e, g + e, 1 - g, g - 1 / 4)

    @property
    def q(self) -> tuple[float, ...]:
        g, e = self.gamma, float(self.epsilon)
        return (1 - g, g - 1 / 4, 5 / 4 - g + e, g + e)

    # Integer thresholds: lower bounds rounded up, upper bounds rounded down, so
    # an integer count passes iff it satisfies the real inequality.
    @cached_property
    def thresholds(self) -> dict:
        e, m = self.epsilon, self.m
        return {
            "size_lo": math.ceil((Fraction(1, 2) + 7 * e / 16) * m),
            "size_hi": math.floor((Fraction(1, 2) + e) * m),
            "half_lo": math.ceil((Fraction(5, 16) + 7 * e / 16) * m),
            "half_hi": m // 2,
            "same_hi": math.floor((Fraction(5, 16) + 3 * e / 4) * m),
            "cross_lo": math.ceil(Fraction(9, 32) * m),
        }


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    observed: tuple  # (min, max) of the checked quantity
    bounds: tuple  # (lower or None, upper or None)


@dataclass(frozen=True, eq=False)
class F1Instance:
    v1: Valuation
    v2: Valuation
    params: F1Params
    seed: int
    attempt: int
    conditions: tuple[ConditionResult, ...]

    @property
    def verified(self) -> bool:
        return len(self.conditions) == 7 and all(c.passed for c in self.conditions)

    @property
    def failed(self) -> list[str]:
        done = {c.name for c in self.conditions}
        missing = [f"C{i}" for i in range(1, 8) if f"C{i}" not in done]
        return [c.name for c in self.conditions if not c.passed] + missing


def _range_check(name, values, lo, hi) -> ConditionResult:
    vmin, vmax = int(values.min()), int(values.max())
    ok = (lo is None or vmin >= lo) and (hi is None or vmax <= hi)
    return ConditionResult(name, ok, (vmin, vmax), (lo, hi))


def _off_diagonal(G: np.ndarray) -> np.ndarray:
    return G[~np.eye(G.shape[0], dtype=bool)]


def _sample_side(params: F1Params, probs, rng) -> np.ndarray:
    t, m = params.t, params.m
    thresh = np.repeat(np.asarray(probs, dtype=np.float32), m // 4)
    out = np.empty((t, m), dtype=bool)
    for lo in range(0, t, _ROW_CHUNK):
        hi = min(t, lo + _ROW_CHUNK)
        out[lo:hi] = rng.random((hi - lo, m), dtype=np.float32) < thresh
    return out


def _side_conditions(params, mat, half, names, fail_fast: bool = True) -> list[ConditionResult]:
    th = params.thresholds
    out = [_range_check(names[0], mat.sum(axis=1), th["size_lo"], th["size_hi"])]
    if fail_fast and not out[-1].passed:
        return out
    out.append(_range_check(names[1], mat[:, half].sum(axis=1), th["half_lo"], th["half_hi"]))
    if fail_fast and not out[-1].passed:
        return out
    out.append(_range_check(names[2], _off_diagonal(cross_min_gram(mat, mat)), None, th["same_hi"]))
    return out


def check_f1_conditions(params: F1Params, r1: np.ndarray, r2: np.ndarray, fail_fast: bool = True):
    """The seven concentration conditions on the random clauses (planted clause excluded)."""
    m = params.m
    first, second = slice(0, m // 2), slice(m // 2, m)
    res = _side_conditions(params, r1, first, ("C1", "C3", "C5"), fail_fast)
    if fail_fast and not all(c.passed for c in res):
        return res
    res2 = _side_conditions(params, r2, second, ("C2", "C4", "C6"), fail_fast)
    res += res2
    if fail_fast and not all(c.passed for c in res2):
        return res
    res.append(_range_check("C7", cross_min_gram(r1, r2).ravel(), params.thresholds["cross_lo"], None))
    return res


def _planted(params: F1Params, side: int) -> np.ndarray:
    row = np.zeros(params.m, dtype=bool)
    if side == 0:
        row[: params.m // 2] = True
    else:
        row[params.m // 2 :] = True
    return row


def gen_f1(params: F1Params, seed: int, max_retries: int = 1000, start_attempt: int = 0) -> F1Instance:
    """Sample until all seven conditions hold (attempt ``a`` uses seed ``(seed, a)``).

    Side 1 is sampled and checked before side 2 is drawn, so most failures
    cost one side's sampling.  When retries run out the attempt that passed
    the most conditions is returned, flagged unverified.
    """
    best = None
    for attempt in range(start_attempt, start_attempt + max_retries):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        r1 = _sample_side(params, params.p, rng)
        res = _side_conditions(params, r1, slice(0, params.m // 2), ("C1", "C3", "C5"))
        r2 = None
        if all(c.passed for c in res):
            r2 = _sample_side(params, params.q, rng)
            res2 = _side_conditions(params, r2, slice(params.m // 2, params.m), ("C2", "C4", "C6"))
            res += res2
            if all(c.passed for c in res2):
                res.append(
                    _range_check("C7", cross_min_gram(r1, r2).ravel(), params.thresholds["cross_lo"], None)
                )
        score = sum(c.passed for c in res)
        if best is None or score > best[0]:
            best = (score, attempt, r1, r2, tuple(res))
        if score == 7:
            break
    _, attempt, r1, r2, res = best
    if r2 is None:
        # side 1 failed; replay the attempt to draw its side 2 anyway
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        _sample_side(params, params.p, rng)
        r2 = _sample_side(params, params.q, rng)
    v1 = Valuation(np.vstack([_planted(params, 0), r1]))
    v2 = Valuation(np.vstack([_planted(params, 1), r2]))
    return F1Instance(v1, v2, params, seed, attempt, res)


@dataclass(frozen=True)
class F1SideReport:
    sketch: tuple[int, ...]
    excludes_planted: bool
    swap_clause: int
    swap_gain: Fraction
    swap_bound: Fraction
    swap_ok: bool


@dataclass(frozen=True)
class F1ExclusionReport:
    k: int
    alpha: Fraction
    passed: bool
    sides: tuple[F1SideReport, ...] = ()
    best_pair: int | None = None
    best_pair_bound: Fraction | None = None
    all_pairs_max: int | None = None
    all_pairs_bound: Fraction | None = None
    sw_star: int | None = None
    reason: str = ""
    methods: tuple[str, ...] = field(default=())


def _swap_check(v: Valuation, sketch: tuple[int, ...], params: SketchParams, eps: Fraction, m: int) -> tuple:
    """Force the planted clause into position 0 and swap it for an unused random clause."""
    k = params.k
    forced = (0,) + tuple(sketch[1:])
    used = set(forced[1:])
    l = next(j for j in range(1, v.t) if j not in used)
    gains = swap_gains(v, forced, params)
    gain = gains[0, l]
    if k == 1:
        bound = (1 - params.alpha) * (int(v.totals[l]) - m // 2)
        ok = gain == bound and gain > 0
    else:
        t = v.t - 1
        bound = eps * m / k * (Fraction(1, 64) - 1 / (eps * t))
        ok = gain >= bound and gain > 0
    return l, gain, bound, ok


def verify_f1_exclusion(inst: F1Instance, k: int, alpha, max_candidates: int = 2_000_000) -> F1ExclusionReport:
    """Sketch both sides, confirm the planted clause is absent, and bound the best reported pair."""
    alpha = _fraction(alpha)
    if not inst.verified:
        return F1ExclusionReport(k, alpha, False, reason="unverified instance; failed: " + ",".join(inst.failed))
    if alpha > Fraction(1, 2):
        raise ValueError("the exclusion argument needs alpha <= 1/2")
    params = SketchParams(k, alpha)
    eps, m = inst.params.epsilon, inst.params.m
    sides, sketches, methods = [], [], []
    for v in (inst.v1, inst.v2):
        sk = compute_sketch(v, params, max_candidates)
        l, gain, bound, ok = _swap_check(v, sk.clause_indices, params, eps, m)
        sides.append(F1SideReport(sk.clause_indices, 0 not in sk.clause_indices, l, gain, bound, ok))
        sketches.append(sk)
        methods.append(sk.method)
    W = pair_welfare_matrix(sketches[0].clauses, sketches[1].clauses)
    best_pair = int(W.max())
    best_bound = (Fraction(23, 32) + 2 * eps) * m
    Wall = pair_welfare_matrix(inst.v1, inst.v2)
    all_pairs = int(Wall[1:, 1:].max())
    all_bound = 2 * (Fraction(1, 2) + eps) * m - Fraction(9 * m, 32)
    sw = int(Wall.max())
    passed = (
        all(s.excludes_planted and s.swap_ok for s in sides)
        and best_pair <= best_bound
        and all_pairs <= all_bound
        and sw == m
    )
    return F1ExclusionReport(
        k, alpha, passed, tuple(sides), best_pair, best_bound, all_pairs, all_bound, sw, methods=tuple(methods)
    )


def f1_to_instance(inst: F1Instance) -> Instance:
    prov = {
        "construction": "f1",
        "params": {"epsilon": str(inst.params.epsilon), "m": inst.params.m, "t": inst.params.t},
        "seed": inst.seed,
        "attempt": inst.attempt,
        "verified": inst.verified,
        "failed_conditions": inst.failed,
    }
    return Instance((inst.v1, inst.v2), prov)


# -- appendix G -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GInstance:
    m: int
    l: int
    M: int
    S: np.ndarray
    T: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    J1: int
    J2: int
    v1: Valuation
    v2: Valuation
    seed: object = None


def _choose(rng, pool: np.ndarray, size: int, rows: int | None = None) -> np.ndarray:
    """Uniform ``size``-subsets of ``pool``; one per row when ``rows`` is given."""
    if rows is None:
        return rng.permutation(pool)[:size]
    keys = rng.random((rows, pool.size))
    return pool[np.argsort(keys, axis=1)[:, :size]]


def _sample_conditioned(rng, m: int, inside: np.ndarray, rows: int) -> np.ndarray:
    """``rows`` draws of X with |X & inside| = m/3 and |X - inside| = m/6."""
    out = np.zeros((rows, m), dtype=bool)
    r = np.arange(rows)[:, None]
    out[r, _choose(rng, np.flatnonzero(inside), m // 3, rows)] = True
    out[r, _choose(rng, np.flatnonzero(~inside), m // 6, rows)] = True
    return out


def gen_appendix_g(m: int, l: int = 64, seed=None, force_M: int | None = None) -> GInstance:
    if m <= 0 or m % 6:
        raise DimensionError(f"m must be a positive multiple of 6, got {m}")
    if l < 2:
        raise ValueError("l must be at least 2")
    if force_M not in (None, 0, 1):
        raise ValueError("force_M must be 0 or 1")
    rng = np.random.default_rng(seed)
    # S, T: |S| = |T| = m/2, |S & T| = m/3 -> cells of sizes m/3, m/6, m/6, m/3
    perm = rng.permutation(m)
    st, s_only, t_only, neither = np.split(perm, [m // 3, m // 2, 2 * m // 3])
    S = np.zeros(m, dtype=bool)
    T = np.zeros(m, dtype=bool)
    S[st] = S[s_only] = True
    T[st] = T[t_only] = True
    M = int(rng.integers(2)) if force_M is None else force_M
    U1 = np.zeros(m, dtype=bool)
    if M == 1:
        U1[s_only] = True
        U1[_choose(rng, st, m // 6)] = True
        U1[_choose(rng, neither, m // 6)] = True
        U2 = ~U1
    else:
        U1[st] = True
        U1[_choose(rng, neither, m // 6)] = True
        U2 = U1.copy()
    J1, J2 = int(rng.integers(l)), int(rng.integers(l))
    A = _sample_conditioned(rng, m, S, l)
    B = _sample_conditioned(rng, m, T, l)
    A[J1], B[J2] = U1, U2
    return GInstance(m, l, M, S, T, U1, U2, J1, J2, Valuation(A), Valuation(B), seed)


L_NOTE = "l is a free parameter here; the lower-bound argument needs l exponential in m"


def _json_seed(seed):
    return seed if seed is None or isinstance(seed, int) else repr(seed)


def g_to_instance(g: GInstance, reveal: bool = False) -> Instance:
    prov = {"construction": "appendix-g", "params": {"m": g.m, "l": g.l}, "seed": _json_seed(g.seed), "note": L_NOTE}
    if reveal:
        prov["hidden"] = {
            "M": g.M,
            "J1": g.J1,
            "J2": g.J2,
            "S": np.flatnonzero(g.S).tolist(),
            "T": np.flatnonzero(g.T).tolist(),
            "U1": np.flatnonzero(g.U1).tolist(),
            "U2": np.flatnonzero(g.U2).tolist(),
        }
    return Instance((g.v1, g.v2), prov)


def _single_miss(spec, m: int) -> Fraction:
    kind, arg = spec
    if kind == "fixed":
        return Fraction(0) if arg else Fraction(1)
    drawn = m // 3 if arg.endswith("in") else m // 6
    return Fraction(m // 2 - drawn, m // 2)


def _pair_miss(spec1, spec2, m: int) -> Fraction:
    """P(two distinct items both avoid the set) for independent-or-shared blocks."""
    if spec1[0] == "rand" and spec1 == spec2:
        N = m // 2
        d = m // 3 if spec1[1].endswith("in") else m // 6
        return Fraction((N - d) * (N - d - 1), N * (N - 1))
    return _single_miss(spec1, m) * _single_miss(spec2, m)


def appendix_g_pair_moments(m: int, case: str) -> tuple[Fraction, Fraction]:
    """Exact mean and variance of ``|A u B|`` for a clause pair when ``M = 0``.

    ``case`` is ``"one"`` (A is the planted set, B ~ D_T) or ``"neither"``
    (A ~ D_S, B ~ D_T independently).  ``|A u B| = m - Z`` where ``Z`` counts
    items missed by both sets.  Items are grouped into parts on which the
    sampling law is uniform; within a block of a uniform ``d``-subset the
    missing indicators of two distinct items are hypergeometric.
    """
    if m <= 0 or m % 6:
        raise DimensionError("m must be a positive multiple of 6")
    # cells of the (S, T) partition: (size, in S, in T)
    cells = {"ST": (m // 3, True, True), "S-": (m // 6, True, False),
             "-T": (m // 6, False, True), "--": (m // 3, False, False)}
    parts = []  # (size, A spec, B spec)
    for name, (size, in_s, in_t) in cells.items():
        b_spec = ("rand", "T-in" if in_t else "T-out")
        if case == "neither":
            parts.append((size, ("rand", "S-in" if in_s else "S-out"), b_spec))
        elif case == "one":
            # planted U1 (M = 0) holds all of S&T and m/6 of the m/3 items outside S u T
            if name == "ST":
                parts.append((size, ("fixed", True), b_spec))
            elif name == "--":
                parts.append((m // 6, ("fixed", True), b_spec))
                parts.append((m // 6, ("fixed", False), b_spec))
            else:
                parts.append((size, ("fixed", False), b_spec))
        else:
            raise ValueError("case must be 'one' or 'neither'")

    mean = Fraction(0)
    second = Fraction(0)
    for idx1, (s1, a1, b1) in enumerate(parts):
        p1 = _single_miss(a1, m) * _single_miss(b1, m)
        mean += s1 * p1
        second += s1 * p1
        for idx2, (s2, a2, b2) in enumerate(parts):
            pairs = s1 * (s1 - 1) if idx1 == idx2 else s1 * s2
            second += pairs * _pair_miss(a1, a2, m) * _pair_miss(b1, b2, m)
    return m - mean, second - mean * mean


@dataclass(frozen=True)
class CaseStat:
    draws: int
    mean: float
    exact_mean: Fraction
    exact_var: Fraction
    sigma_of_mean: float

    @property
    def z(self) -> float:
        return (self.mean - float(self.exact_mean)) / self.sigma_of_mean if self.sigma_of_mean else 0.0

    @property
    def within_3sigma(self) -> bool:
        return abs(self.z) <= 3


@dataclass(frozen=True)
class GStats:
    m: int
    l: int
    trials: int
    alpha: float
    m0_trials: int
    m1_trials: int
    both_planted_values: tuple[int, ...]
    one_planted: CaseStat
    neither_planted: CaseStat
    frac_above_alpha_m0: float
    frac_full_m1: float

    @property
    def both_planted_exact(self) -> bool:
        return all(v == self.m // 2 for v in self.both_planted_values)


def _case_stat(values: list[int], m: int, case: str) -> CaseStat:
    mu, var = appendix_g_pair_moments(m, case)
    n = len(values)
    mean = float(np.mean(values)) if n else float("nan")
    return CaseStat(n, mean, mu, var, math.sqrt(var / n) if n else float("nan"))


def stats_appendix_g(m: int = 108, l: int = 64, trials: int = 21000, alpha=None, seed: int = 0) -> GStats:
    """Monte-Carlo welfare statistics over independently drawn instances.

    Each ``M = 0`` trial contributes one draw per pair case: the planted pair,
    the planted ``A_{J1}`` against one random ``B_j`` (j != J2), and one random
    non-planted pair.  Trial ``i`` uses seed ``(seed, i)``.
    """
    if alpha is None:
        alpha = 0.75 - 1 / 108
    both, one, neither = [], [], []
    above, m0, m1, full = 0, 0, 0, 0
    for i in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        g = gen_appendix_g(m, l, rng)
        W = pair_welfare_matrix(g.v1, g.v2)
        sw = int(W.max())
        if g.M == 1:
            m1 += 1
            full += sw == m
            continue
        m0 += 1
        above += sw > alpha * m
        both.append(int(W[g.J1, g.J2]))
        j2 = int(rng.integers(l - 1))
        j2 += j2 >= g.J2
        one.append(int(W[g.J1, j2]))
        j1 = int(rng.integers(l - 1))
        j1 += j1 >= g.J1
        j2 = int(rng.integers(l - 1))
        j2 += j2 >= g.J2
        neither.append(int(W[j1, j2]))
    return GStats(
        m=m,
        l=l,
        trials=trials,
        alpha=float(alpha),
        m0_trials=m0,
        m1_trials=m1,
        both_planted_values=tuple(both),
        one_planted=_case_stat(one, m, "one"),
        neither_planted=_case_stat(neither, m, "neither"),
        frac_above_alpha_m0=above / m0 if m0 else float("nan"),
        frac_full_m1=full / m1 if m1 else float("nan"),
    )
