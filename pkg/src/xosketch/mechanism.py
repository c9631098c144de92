"""Sequential sketch-report mechanism with per-item averaged prices.

Player ``l`` (all but the last) reports ``k`` binary clauses over the items
still unallocated.  The auctioneer draws ``j`` uniformly, hands over
``supp(b_j)`` and charges ``sum_{i in supp(b_j)} c_i / (2k)`` where ``c_i`` counts
the reported clauses containing ``i``.  The last player takes the rest free.

In expectation over ``j`` a report earns

    (1/k) sum_j v(B_j) - (1/2) sum_i x_i^2,     x_i = c_i / k,

which for reports made of true clauses is exactly the (k, 1/2)-sketch
objective; :func:`best_response` checks exhaustively that nothing else does
as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetExceededError, InvalidReportError, NotBinaryError
from .sketch import DEFAULT_MAX_CANDIDATES, SketchParams, _multisets, compute_sketch, sketch_exact
from .valuations import Allocation, Valuation, _as_mask

__all__ = [
    "Report",
    "MechanismOutcome",
    "BestResponse",
    "truthful_strategy",
    "validate_report",
    "payment",
    "run_mechanism",
    "expected_utility",
    "best_response",
    "mechanism_expected_welfare",
]

DEFAULT_MAX_REPORTS = 10**6

# A strategy maps (player, true valuation, remaining mask, k) to k reported sets.
Strategy = Callable[[int, Valuation, np.ndarray, int], Sequence]


@dataclass(frozen=True, eq=False)
class Report:
    """``k`` binary clauses as a (k, m) boolean matrix."""

    sets: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.sets)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise InvalidReportError("a report is a non-empty list of clauses")
        if arr.dtype != bool:
            if not np.isin(arr, (0, 1)).all():
                raise InvalidReportError("reported clauses must be binary")
            arr = arr.astype(bool)
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "sets", arr)

    @classmethod
    def from_sets(cls, m: int, sets: Sequence) -> "Report":
        if not sets:
            raise InvalidReportError("a report is a non-empty list of clauses")
        return cls(np.stack([_as_mask(s, m) for s in sets]))

    @property
    def k(self) -> int:
        return int(self.sets.shape[0])

    @property
    def m(self) -> int:
        return int(self.sets.shape[1])

    @property
    def counts(self) -> np.ndarray:
        return self.sets.sum(axis=0).astype(np.int64)

    def key(self) -> tuple:
        """Order-free identity (reports are multisets)."""
        return tuple(sorted(tuple(np.flatnonzero(r).tolist()) for r in self.sets))

    def __eq__(self, other) -> bool:
        return isinstance(other, Report) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"Report({[list(s) for s in self.key()]})"


@dataclass(frozen=True)
class MechanismOutcome:
    allocation: Allocation
    payments: tuple[Fraction, ...]
    utilities: tuple[Fraction, ...]
    reports: tuple[Report, ...]
    coins: tuple[int, ...]

    @property
    def welfare(self):
        return sum(u + p for u, p in zip(self.utilities, self.payments))


def validate_report(report, remaining: np.ndarray, k: int) -> Report:
    """Check ``report`` against the boolean mask of unallocated items."""
    left = np.asarray(remaining, dtype=bool)
    rep = report if isinstance(report, Report) else Report.from_sets(left.size, report)
    if rep.m != left.size:
        raise InvalidReportError(f"report covers {rep.m} items, expected {left.size}")
    if rep.k != k:
        raise InvalidReportError(f"expected {k} clauses, got {rep.k}")
    if (rep.sets & ~left).any():
        raise InvalidReportError("reported clauses must lie within the unallocated items")
    return rep


def payment(report: Report, j: int) -> Fraction:
    """Price of receiving ``supp(b_j)``."""
    c = report.counts
    return Fraction(int(c[report.sets[j]].sum()), 2 * report.k)


def truthful_strategy(max_candidates: int = DEFAULT_MAX_CANDIDATES) -> Strategy:
    """Report the (k, 1/2)-sketch of the true valuation restricted to the items left."""

    def strategy(player: int, v: Valuation, remaining: np.ndarray, k: int) -> Report:
        sk = compute_sketch(v.restrict(remaining), SketchParams(k, Fraction(1, 2)), max_candidates)
        return Report(sk.clauses.matrix)

    return strategy


def _check_bxos(vals: Sequence[Valuation]) -> None:
    for v in vals:
        if not v.is_binary:
            raise NotBinaryError("the mechanism is defined for binary XOS valuations")


def run_mechanism(
    true_vals: Sequence[Valuation],
    k: int,
    strategies: Sequence[Strategy] | None = None,
    seed=None,
) -> MechanismOutcome:
    vals = list(true_vals)
    _check_bxos(vals)
    n, m = len(vals), vals[0].m
    if n < 2:
        raise ValueError("the mechanism needs at least two players")
    if strategies is None:
        strategies = [truthful_strategy()] * (n - 1)
    rng = np.random.default_rng(seed)
    left = np.ones(m, dtype=bool)
    owner = np.full(m, n - 1, dtype=np.int64)
    payments, reports, coins = [], [], []
    for player in range(n - 1):
        rep = validate_report(strategies[player](player, vals[player], left.copy(), k), left, k)
        j = int(rng.integers(k))
        take = rep.sets[j]
        owner[take] = player
        left = left & ~take
        payments.append(payment(rep, j))
        reports.append(rep)
        coins.append(j)
    payments.append(Fraction(0))
    alloc = Allocation(owner, n=n)
    utilities = tuple(Fraction(v.value(alloc.bundle(p))) - payments[p] for p, v in enumerate(vals))
    return MechanismOutcome(alloc, tuple(payments), utilities, tuple(reports), tuple(coins))


def expected_utility(true_val: Valuation, report, k: int | None = None) -> Fraction:
    """``(1/k) sum_j v(B_j) - (1/2) sum_i x_i^2`` as an exact rational."""
    rep = report if isinstance(report, Report) else Report.from_sets(true_val.m, report)
    if k is not None and rep.k != k:
        raise InvalidReportError(f"expected {k} clauses, got {rep.k}")
    k = rep.k
    c = rep.counts
    value = sum(int(true_val.value(r)) for r in rep.sets)
    return Fraction(value, k) - Fraction(int((c * c).sum()), 2 * k * k)


@dataclass(frozen=True)
class BestResponse:
    utility: Fraction
    reports: tuple[Report, ...]
    sketch_objective: Fraction
    all_sketches: bool
    best_other: Fraction | None
    candidates: int

    @property
    def strict(self) -> bool:
        """The best response beats every report that is not a (k, 1/2)-sketch."""
        return self.best_other is None or self.best_other < self.utility

    @property
    def certified(self) -> bool:
        return self.all_sketches and self.utility == self.sketch_objective and self.strict


def _subset_table(left: np.ndarray) -> np.ndarray:
    items = np.flatnonzero(left)
    r = len(items)
    codes = np.arange(1 << r)
    sets = np.zeros((1 << r, left.size), dtype=bool)
    sets[:, items] = ((codes[:, None] >> np.arange(r)) & 1).astype(bool)
    return sets


def best_response(
    true_val: Valuation,
    k: int,
    remaining=None,
    search: str = "exhaustive",
    max_reports: int = DEFAULT_MAX_REPORTS,
) -> BestResponse:
    """All expected-utility-maximizing reports, with the sketch certification.

    ``exhaustive`` ranges over every k-multiset of subsets of the remaining
    items; ``clause-restricted`` only over multisets of the (restricted) true
    clauses.
    """
    _check_bxos([true_val])
    m = true_val.m
    left = np.ones(m, dtype=bool) if remaining is None else _as_mask(remaining, m)
    v = true_val.restrict(left)
    clause_sets = {tuple(np.flatnonzero(r).tolist()) for r in v.matrix}

    if search == "exhaustive":
        if 2 ** (int(left.sum()) * k) > max_reports:
            raise BudgetExceededError(f"2**(r*k) reports exceed max_reports={max_reports}")
        sets = _subset_table(left)
    elif search == "clause-restricted":
        if math.comb(v.t + k - 1, k) > max_reports:
            raise BudgetExceededError(f"clause multisets exceed max_reports={max_reports}")
        sets = np.asarray(v.matrix, dtype=bool)
    else:
        raise ValueError(f"unknown search mode {search!r}")

    set_value = np.array([int(v.value(s)) for s in sets], dtype=np.int64)
    is_clause = np.array([tuple(np.flatnonzero(s).tolist()) in clause_sets for s in sets])
    idx = _multisets(sets.shape[0], k)
    counts = sum(sets[idx[:, j]].astype(np.int64) for j in range(k))
    # 2k^2 * expected utility
    scaled = 2 * k * set_value[idx].sum(axis=1) - (counts * counts).sum(axis=1)
    best = scaled.max()
    denom = 2 * k * k

    sk = sketch_exact(v, SketchParams(k, Fraction(1, 2)))
    target = sk.objective * denom
    from_clauses = is_clause[idx].all(axis=1)
    is_sketch = from_clauses & (scaled == target)
    winners = np.flatnonzero(scaled == best)
    others = scaled[~is_sketch]
    return BestResponse(
        utility=Fraction(int(best), denom),
        reports=tuple(Report(sets[idx[w]]) for w in winners),
        sketch_objective=sk.objective,
        all_sketches=bool(is_sketch[winners].all()),
        best_other=Fraction(int(others.max()), denom) if others.size else None,
        candidates=int(idx.shape[0]),
    )


def mechanism_expected_welfare(
    true_vals: Sequence[Valuation], k: int, strategies: Sequence[Strategy] | None = None
) -> Fraction:
    """Exact expected welfare over all ``k**(n-1)`` auctioneer coin paths."""
    vals = list(true_vals)
    _check_bxos(vals)
    n, m = len(vals), vals[0].m
    if strategies is None:
        strategies = [truthful_strategy()] * (n - 1)

    def expect(player: int, left: np.ndarray, acc) -> Fraction:
        if player == n - 1:
            return acc + vals[player].value(left)
        rep = validate_report(strategies[player](player, vals[player], left.copy(), k), left, k)
        total = Fraction(0)
        for j in range(k):
            take = rep.sets[j]
            total += expect(player + 1, left & ~take, acc + vals[player].value(take))
        return total / k

    return expect(0, np.ones(m, dtype=bool), 0)
