"""Exact optimal-welfare oracles.

Three independent routes to ``SW*``:

* closed forms for clause pairs (per-item maximum),
* clause-tuple enumeration (exact for XOS: once every player's clause is
  fixed the problem separates per item),
* exhaustive enumeration of all ``n**m`` ownership vectors, kept purely as a
  cross-check oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, DimensionError, NotBinaryError
from .valuations import (
    Allocation,
    Clause,
    ItemSet,
    Valuation,
    _scalar,
    argmax_clause,
    cross_min_gram,
    eval_valuation,
)

__all__ = [
    "WelfareResult",
    "sw_star_additive_pair",
    "sw_star_xos_pair",
    "sw_star_n",
    "brute_force_partitions",
    "alice_only_allocation",
    "pair_welfare_matrix",
]

DEFAULT_MAX_TUPLES = 10**6
DEFAULT_MAX_PARTITIONS = 10**7


@dataclass(frozen=True)
class WelfareResult:
    value: object
    allocation: Allocation
    witnesses: tuple[int, ...]


def _first_max(arr: np.ndarray) -> int:
    flat = arr.ravel()
    return int(np.flatnonzero(flat == flat.max())[0])


def _check_same_m(vals: Sequence) -> int:
    ms = {v.m for v in vals}
    if len(ms) != 1:
        raise DimensionError(f"valuations disagree on item count: {sorted(ms)}")
    return ms.pop()


def sw_star_additive_pair(a: Clause, b: Clause) -> WelfareResult:
    """Best split between two additive bidders: each item to the higher value.

    Ties go to player 0.
    """
    if a.m != b.m:
        raise DimensionError(f"item counts differ: {a.m} != {b.m}")
    av, bv = a.values, b.values
    if av.dtype == bool and bv.dtype == bool:
        to_first = av | ~bv
        value = int((av | bv).sum())
    else:
        to_first = av >= bv
        value = _scalar(np.where(to_first, av, bv).sum())
    return WelfareResult(value, Allocation(np.where(to_first, 0, 1), n=2), (0, 0))


def pair_welfare_matrix(v1: Valuation, v2: Valuation) -> np.ndarray:
    """``W[j, l] = SW*(a_j, b_l) = a_j([m]) + b_l([m]) - sum_i min(a_j(i), b_l(i))``."""
    if v1.m != v2.m:
        raise DimensionError(f"item counts differ: {v1.m} != {v2.m}")
    mg = cross_min_gram(v1.matrix, v2.matrix)
    return v1.totals[:, None] + v2.totals[None, :] - mg


def sw_star_xos_pair(v1: Valuation, v2: Valuation) -> WelfareResult:
    """Two-player optimum as the best clause pair (lowest ``(j, l)`` on ties)."""
    W = pair_welfare_matrix(v1, v2)
    flat = _first_max(W)
    j, l = divmod(flat, W.shape[1])
    pair = sw_star_additive_pair(v1.clause(j), v2.clause(l))
    return WelfareResult(_scalar(W[j, l]), pair.allocation, (j, l))


def sw_star_n(vals: Sequence[Valuation], max_tuples: int = DEFAULT_MAX_TUPLES) -> WelfareResult:
    """n-player optimum by enumerating one clause per player.

    For a fixed clause tuple each item goes to the player whose clause values
    it most (lowest player index on ties); the best tuple in lexicographic
    order wins.
    """
    vals = list(vals)
    m = _check_same_m(vals)
    n = len(vals)
    count = int(np.prod([v.t for v in vals], dtype=object))
    if count > max_tuples:
        raise BudgetExceededError(
            f"{count} clause tuples exceed max_tuples={max_tuples}; use brute_force_partitions"
        )
    if n == 1:
        j = _first_max(vals[0].totals)
        return WelfareResult(_scalar(vals[0].totals[j]), Allocation(np.zeros(m, dtype=np.int64), n=1), (j,))

    last = vals[-1].matrix
    best_value, best_tuple = None, None
    for head in itertools.product(*(range(v.t) for v in vals[:-1])):
        partial = vals[0].matrix[head[0]]
        for p in range(1, n - 1):
            partial = np.maximum(partial, vals[p].matrix[head[p]])
        scores = np.maximum(partial[None, :], last).sum(axis=1)
        l = _first_max(scores)
        if best_value is None or scores[l] > best_value:
            best_value, best_tuple = scores[l], head + (l,)

    rows = np.stack([vals[p].matrix[best_tuple[p]] for p in range(n)])
    if rows.dtype == bool:
        rows = rows.astype(np.int64)
    owner = np.argmax(rows, axis=0)
    return WelfareResult(_scalar(best_value), Allocation(owner, n=n), tuple(int(x) for x in best_tuple))


def _subset_value_table(v: Valuation) -> np.ndarray:
    m = v.m
    masks = np.arange(1 << m, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(np.int64)
    mat = v.matrix.astype(np.int64) if v.matrix.dtype == bool else v.matrix
    return (bits @ mat.T).max(axis=1)


def brute_force_partitions(
    vals: Sequence[Valuation], max_partitions: int = DEFAULT_MAX_PARTITIONS
) -> WelfareResult:
    """Exhaustive maximum over all ``n**m`` ownership vectors."""
    vals = list(vals)
    m = _check_same_m(vals)
    n = len(vals)
    total = n**m
    if total > max_partitions:
        raise BudgetExceededError(f"{n}**{m} = {total} partitions exceed max_partitions={max_partitions}")
    tables = [_subset_value_table(v) for v in vals]
    pow2 = (1 << np.arange(m, dtype=np.int64))
    place = n ** np.arange(m, dtype=np.int64)

    best_value, best_code = None, 0
    step = 1 << 16
    for lo in range(0, total, step):
        codes = np.arange(lo, min(total, lo + step), dtype=np.int64)
        owner = (codes[:, None] // place) % n
        score = None
        for p in range(n):
            idx = ((owner == p) * pow2).sum(axis=1)
            part = tables[p][idx]
            score = part if score is None else score + part
        k = _first_max(score)
        if best_value is None or score[k] > best_value:
            best_value, best_code = score[k], int(codes[k])

    owner = (best_code // place) % n
    alloc = Allocation(owner, n=n)
    witnesses = tuple(argmax_clause(v, alloc.bundle(p)) for p, v in enumerate(vals))
    return WelfareResult(_scalar(best_value), alloc, witnesses)


def alice_only_allocation(b: Clause, v2: Valuation) -> WelfareResult:
    """Give Alice exactly the support of binary clause ``b``, Bob the rest.

    Against a binary XOS opponent this split is optimal for the pair
    ``(b, v2)``: moving an item of ``supp(b)`` to Bob gains him at most 1 and
    costs Alice exactly 1.
    """
    if not b.binary:
        raise NotBinaryError("alice_only_allocation needs a binary clause")
    if not v2.is_binary:
        raise NotBinaryError("alice_only_allocation needs a binary XOS opponent")
    if b.m != v2.m:
        raise DimensionError(f"item counts differ: {b.m} != {v2.m}")
    alice = ItemSet(b.values)
    rest = alice.complement()
    value = len(alice) + eval_valuation(v2, rest)
    return WelfareResult(value, Allocation.from_bundle(alice), (0, argmax_clause(v2, rest)))
