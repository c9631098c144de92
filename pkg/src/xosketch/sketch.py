"""Clause sketches: pick ``k`` clauses (with repetition) that are large but varied.

For a multiset ``b_1..b_k`` of clauses the per-item level function is
``x_{i,u} = #{j : b_j(i) >= u} / k`` and the sketch objective is

    sum_i integral_0^inf (x_{i,u} - alpha * x_{i,u}**2) du,

which for binary clauses reduces to ``sum_i (x_i - alpha * x_i**2)``.  Because
``integral x_{i,u}**2 du = k**-2 * sum_{j,j'} min(b_j(i), b_j'(i))`` the
objective is also a quadratic form in the clause counts over the min-Gram
matrix of the valuation; enumeration and local search use that form while
:func:`objective_binary` / :func:`objective_general` evaluate the definition
directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from numbers import Rational
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetExceededError, NotBinaryError
from .valuations import Valuation, _scalar, is_exact

__all__ = [
    "SketchParams",
    "Sketch",
    "LemmaReport",
    "objective_binary",
    "objective_general",
    "sketch_objective",
    "sketch_exact",
    "sketch_local_search",
    "compute_sketch",
    "swap_gains",
    "is_swap_optimal",
    "verify_exchange_lemma_binary",
    "verify_exchange_lemma_general",
    "DEFAULT_MAX_CANDIDATES",
]

DEFAULT_MAX_CANDIDATES = 2_000_000
FLOAT_RTOL = 1e-9


def _as_fraction(alpha) -> Fraction:
    if isinstance(alpha, float):
        return Fraction(alpha).limit_denominator(10**9)
    if isinstance(alpha, (Rational, str)):
        return Fraction(alpha)
    raise TypeError(f"alpha must be rational, got {alpha!r}")


@dataclass(frozen=True)
class SketchParams:
    """Number of reported clauses ``k`` and regulariser weight ``alpha``."""

    k: int
    alpha: Fraction = Fraction(1, 2)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        alpha = _as_fraction(self.alpha)
        if not 0 <= alpha <= Fraction(1, 2):
            raise ValueError(f"alpha must lie in [0, 1/2], got {alpha}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True, eq=False)
class Sketch:
    """A k-multiset of clause indices of ``valuation`` and its objective."""

    valuation: Valuation
    clause_indices: tuple[int, ...]
    objective: object
    params: SketchParams
    method: str = "exact"
    certified: bool = True

    @property
    def k(self) -> int:
        return len(self.clause_indices)

    @cached_property
    def clauses(self) -> Valuation:
        """The reported clauses as a valuation (one row per multiset element)."""
        return self.valuation.select(self.clause_indices)

    @cached_property
    def counts(self) -> np.ndarray:
        """``k * x_i`` for binary valuations (number of reported clauses holding item i)."""
        if not self.valuation.is_binary:
            raise NotBinaryError("counts are defined for binary valuations; use levels()")
        return self.clauses.matrix.sum(axis=0).astype(np.int64)

    @property
    def coverage(self) -> tuple[Fraction, ...]:
        """Exact ``x_i = counts_i / k``."""
        return tuple(Fraction(int(c), self.k) for c in self.counts)

    def levels(self, i: int) -> list[tuple[object, Fraction]]:
        """Piecewise description of ``u -> x_{i,u}``: ``(upper breakpoint, level)`` pairs."""
        col = [_scalar(x) for x in self.clauses.matrix[:, i]]
        out = []
        for u in sorted({x for x in col if x > 0}):
            out.append((u, Fraction(sum(1 for x in col if x >= u), self.k)))
        return out

    def __repr__(self) -> str:
        return (
            f"Sketch(indices={self.clause_indices}, objective={self.objective}, "
            f"k={self.params.k}, alpha={self.params.alpha}, method={self.method})"
        )


# -- direct evaluation of the definition ---------------------------------------------


def _check_indices(v: Valuation, indices: Sequence[int]) -> np.ndarray:
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("a sketch needs at least one clause")
    if idx.min() < 0 or idx.max() >= v.t:
        raise IndexError(f"clause index out of range for t={v.t}")
    return idx


def objective_binary(v: Valuation, indices: Sequence[int], alpha) -> Fraction:
    """``sum_i (x_i - alpha x_i^2)`` with exact rationals (denominator ``k^2``)."""
    if not v.is_binary:
        raise NotBinaryError("objective_binary requires a binary XOS valuation")
    idx = _check_indices(v, indices)
    alpha = _as_fraction(alpha)
    k = len(idx)
    c = v.matrix[idx].sum(axis=0).astype(np.int64)
    s1 = int(c.sum())
    s2 = int((c * c).sum())
    return Fraction(s1, k) - alpha * Fraction(s2, k * k)


def _level_integral(col: Sequence, k: int, f: Callable, upper=None):
    """``integral_0^upper f(x_u) du`` where ``x_u = #{c in col : c >= u} / k``.

    ``x_u`` is constant between consecutive distinct column values, so the
    integral is a finite sum over those segments.  ``upper=None`` integrates
    to infinity (``x_u`` vanishes past the largest value).
    """
    exact = all(is_exact(x) for x in col) and (upper is None or is_exact(upper))
    total = 0
    prev = 0
    for u in sorted({x for x in col if x > 0}):
        if upper is not None and prev >= upper:
            break
        hi = u if upper is None else min(u, upper)
        level = sum(1 for x in col if x >= u)
        level = Fraction(level, k) if exact else level / k
        total += (hi - prev) * f(level)
        prev = u
    return total


def objective_general(v: Valuation, indices: Sequence[int], alpha):
    """Integral form of the sketch objective, evaluated segment by segment."""
    idx = _check_indices(v, indices)
    k = len(idx)
    exact = v.exact_arithmetic
    a = _as_fraction(alpha) if exact else float(_as_fraction(alpha))
    rows = v.matrix[idx]
    total = 0
    for i in range(v.m):
        col = [_scalar(x) for x in rows[:, i]]
        total += _level_integral(col, k, lambda x: x - a * x * x)
    return Fraction(total) if exact else float(total)


def sketch_objective(v: Valuation, indices: Sequence[int], alpha):
    if v.is_binary:
        return objective_binary(v, indices, alpha)
    return objective_general(v, indices, alpha)


# -- quadratic-form scoring used by the searches --------------------------------------


class _Scorer:
    """Scaled objective ``k * sum sizes - alpha_num/alpha_den * Q`` (times ``alpha_den``).

    ``Q = sum_{j,j'} gram[b_j, b_j']``.  For exact data the score is an
    integer (or Fraction) equal to ``objective * alpha_den * k**2``.
    """

    def __init__(self, v: Valuation, params: SketchParams):
        self.k = params.k
        self.exact = v.exact_arithmetic
        self.sizes = v.totals
        self.gram = v.gram
        if self.exact:
            self.p = params.alpha.numerator
            self.q = params.alpha.denominator
        else:
            self.p = float(params.alpha)
            self.q = 1
            self.sizes = self.sizes.astype(np.float64)
            self.gram = self.gram.astype(np.float64)

    def scores(self, idx: np.ndarray) -> np.ndarray:
        k = self.k
        size_sum = sum(self.sizes[idx[:, j]] for j in range(k))
        quad = sum(self.gram[idx[:, j], idx[:, j]] for j in range(k))
        for j in range(k):
            for jj in range(j + 1, k):
                quad = quad + 2 * self.gram[idx[:, j], idx[:, jj]]
        return self.q * k * size_sum - self.p * quad

    def to_objective(self, score):
        if self.exact:
            return Fraction(_scalar(score)) / (self.q * self.k * self.k)
        return float(score) / (self.k * self.k)

    def swap_deltas(self, idx: np.ndarray) -> np.ndarray:
        """``deltas[p, c]``: score change when position ``p`` is replaced by clause ``c``."""
        G = self.gram
        row_tot = G[:, idx].sum(axis=1)
        diag = np.diagonal(G)
        out = []
        for p in range(self.k):
            b = idx[p]
            R = row_tot - G[:, b]
            d_quad = 2 * (R - R[b]) + diag - diag[b]
            d_size = self.sizes - self.sizes[b]
            out.append(self.q * self.k * d_size - self.p * d_quad)
        return np.stack(out)


@lru_cache(maxsize=256)
def _multisets(t: int, k: int) -> np.ndarray:
    """All non-decreasing index tuples of length ``k`` over ``range(t)``, lexicographic.

    Cached; the returned array is read-only.
    """
    out = _build_multisets(t, k)
    out.flags.writeable = False
    return out


def _build_multisets(t: int, k: int) -> np.ndarray:
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if k == 1:
        return np.arange(t, dtype=np.int64)[:, None]
    parts = []
    for first in range(t):
        tail = _multisets(t - first, k - 1) + first
        head = np.full((tail.shape[0], 1), first, dtype=np.int64)
        parts.append(np.hstack([head, tail]))
    return np.vstack(parts)


def sketch_exact(v: Valuation, params: SketchParams, max_candidates: int = DEFAULT_MAX_CANDIDATES) -> Sketch:
    """Exhaustive argmax over all k-multisets of clauses.

    Ties resolve to the lexicographically smallest sorted index tuple.
    """
    count = math.comb(v.t + params.k - 1, params.k)
    if count > max_candidates:
        raise BudgetExceededError(
            f"{count} clause multisets exceed max_candidates={max_candidates}; "
            "use sketch_local_search"
        )
    scorer = _Scorer(v, params)
    best_idx, best_score = None, None
    # chunk over the leading index to bound memory
    for first in range(v.t):
        tail = _multisets(v.t - first, params.k - 1) + first
        cand = np.hstack([np.full((tail.shape[0], 1), first, dtype=np.int64), tail])
        sc = scorer.scores(cand)
        r = int(np.flatnonzero(sc == sc.max())[0])
        if best_score is None or sc[r] > best_score:
            best_score, best_idx = sc[r], cand[r]
    return Sketch(
        valuation=v,
        clause_indices=tuple(int(i) for i in best_idx),
        objective=scorer.to_objective(best_score),
        params=params,
        method="exact",
        certified=True,
    )


def _initial_multiset(v: Valuation, k: int, seed) -> np.ndarray:
    if seed is not None:
        rng = np.random.default_rng(seed)
        return rng.integers(0, v.t, size=k)
    order = sorted(range(v.t), key=lambda j: (-_scalar(v.totals[j]), j))
    return np.array([order[p % v.t] for p in range(k)], dtype=np.int64)


def sketch_local_search(v: Valuation, params: SketchParams, seed=None, max_iter: int = 100_000) -> Sketch:
    """Best-improvement single-swap local search.

    Starts from the ``k`` clauses with the largest grand-bundle value (or a
    random multiset when ``seed`` is given) and replaces one reported clause
    by another while the objective strictly increases.  The result admits no
    improving single swap, which is the only property the exchange lemmas
    rely on.
    """
    scorer = _Scorer(v, params)
    idx = _initial_multiset(v, params.k, seed)
    for _ in range(max_iter):
        deltas = scorer.swap_deltas(idx)
        best = deltas.max()
        if not best > 0:
            break
        p, c = divmod(int(np.flatnonzero(deltas.ravel() == best)[0]), v.t)
        idx = idx.copy()
        idx[p] = c
    else:
        raise RuntimeError("local search did not converge")
    idx = np.sort(idx)
    score = scorer.scores(idx[None, :])[0]
    return Sketch(
        valuation=v,
        clause_indices=tuple(int(i) for i in idx),
        objective=scorer.to_objective(score),
        params=params,
        method="local_search",
        certified=True,
    )


def compute_sketch(v: Valuation, params: SketchParams, max_candidates: int = DEFAULT_MAX_CANDIDATES) -> Sketch:
    """Exact sketch when the multiset count fits the budget, else local search."""
    if math.comb(v.t + params.k - 1, params.k) <= max_candidates:
        return sketch_exact(v, params, max_candidates)
    return sketch_local_search(v, params)


def swap_gains(v: Valuation, indices: Sequence[int], params: SketchParams) -> np.ndarray:
    """Objective change for every single swap ``(position, clause)``, as objective units."""
    scorer = _Scorer(v, params)
    idx = _check_indices(v, indices)
    deltas = scorer.swap_deltas(idx)
    if scorer.exact:
        denom = scorer.q * params.k * params.k
        return np.vectorize(lambda d: Fraction(_scalar(d)) / denom, otypes=[object])(deltas)
    return deltas / (params.k * params.k)


def is_swap_optimal(v: Valuation, indices: Sequence[int], params: SketchParams) -> bool:
    """Check by direct re-evaluation that no single swap raises the objective."""
    idx = list(_check_indices(v, indices))
    base = sketch_objective(v, idx, params.alpha)
    tol = 0 if v.exact_arithmetic else FLOAT_RTOL * max(1.0, abs(float(base)))
    for p in range(len(idx)):
        for c in range(v.t):
            if c == idx[p]:
                continue
            trial = idx.copy()
            trial[p] = c
            if sketch_objective(v, trial, params.alpha) > base + tol:
                return False
    return True


# -- exchange-lemma verifiers -------------------------------------------------------------


@dataclass(frozen=True)
class LemmaReport:
    passed: bool
    worst_slack: object
    worst_clause: int
    slacks: tuple

    def __bool__(self) -> bool:
        return self.passed


def _report(slacks: list, exact: bool, scale) -> LemmaReport:
    worst = min(range(len(slacks)), key=lambda j: (slacks[j], j))
    tol = 0 if exact else FLOAT_RTOL * max(1.0, float(scale))
    return LemmaReport(
        passed=all(s >= -tol for s in slacks),
        worst_slack=slacks[worst],
        worst_clause=worst,
        slacks=tuple(slacks),
    )


def verify_exchange_lemma_binary(sk: Sketch, v: Valuation, params: SketchParams) -> LemmaReport:
    """Check, for every clause ``a`` with support ``A``,

        sum_i (x_i - 2 alpha x_i^2) + 2 alpha sum_{i in A} x_i >= |A| - 2 alpha v([m]) / k.

    Slack is LHS minus RHS, exact.
    """
    if not v.is_binary:
        raise NotBinaryError("binary exchange lemma needs a binary XOS valuation")
    alpha = params.alpha
    if alpha > Fraction(1, 2):
        raise ValueError("the exchange lemma needs alpha <= 1/2")
    k = params.k
    c = v.matrix[list(sk.clause_indices)].sum(axis=0).astype(np.int64)
    base = Fraction(int(c.sum()), k) - 2 * alpha * Fraction(int((c * c).sum()), k * k)
    on_a = v.matrix.astype(np.int64) @ c
    vm = int(v.grand_value)
    slacks = []
    for j in range(v.t):
        lhs = base + 2 * alpha * Fraction(int(on_a[j]), k)
        rhs = int(v.totals[j]) - 2 * alpha * Fraction(vm, k)
        slacks.append(lhs - rhs)
    return _report(slacks, True, vm)


def verify_exchange_lemma_general(sk: Sketch, v: Valuation, params: SketchParams) -> LemmaReport:
    """Integral form: for every clause ``a``,

        sum_i [ int_0^inf (x_{i,u} - 2 alpha x_{i,u}^2) du + 2 alpha int_0^{a(i)} x_{i,u} du ]
            >= a([m]) - 2 alpha v([m]) / k.
    """
    alpha = params.alpha
    if alpha > Fraction(1, 2):
        raise ValueError("the exchange lemma needs alpha <= 1/2")
    k = params.k
    exact = v.exact_arithmetic
    a2 = 2 * alpha if exact else 2 * float(alpha)
    rows = v.matrix[list(sk.clause_indices)]
    cols = [[_scalar(x) for x in rows[:, i]] for i in range(v.m)]
    base = sum(_level_integral(col, k, lambda x: x - a2 * x * x) for col in cols)
    vm = _scalar(v.grand_value)
    slacks = []
    for j in range(v.t):
        a = [_scalar(x) for x in v.matrix[j]]
        capped = sum(_level_integral(cols[i], k, lambda x: x, upper=a[i]) for i in range(v.m) if a[i] > 0)
        lhs = base + a2 * capped
        rhs = _scalar(v.totals[j]) - a2 * (Fraction(vm) / k if exact else vm / k)
        slacks.append(Fraction(lhs - rhs) if exact else float(lhs - rhs))
    return _report(slacks, exact, vm)
