"""Two-party and sequential protocols built on clause sketches.

Randomized protocols are evaluated exactly: the expected welfare is the
average over every outcome of the uniform coin, while ``seed`` picks the
single realized branch reported as ``allocation``/``welfare``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, DecisionSpecError, DimensionError, NotBinaryError
from .sketch import DEFAULT_MAX_CANDIDATES, Sketch, SketchParams, compute_sketch
from .valuations import Allocation, Clause, ItemSet, Valuation, _scalar
from .welfare import alice_only_allocation, pair_welfare_matrix, sw_star_additive_pair

__all__ = [
    "Message",
    "Transcript",
    "ProtocolOutcome",
    "DecisionSpec",
    "DEFAULT_VALUE_BITS",
    "wrapup_alice_only",
    "wrapup_best_known",
    "wrapup_best_known_decision",
    "run_protocol1",
    "run_protocol2",
    "run_protocol3",
    "run_protocol4",
    "run_protocol5",
    "run_protocol6",
    "baseline_grand_bundle",
    "guarantee",
]

DEFAULT_VALUE_BITS = 32
DEFAULT_MAX_PATHS = 100_000


@dataclass(frozen=True)
class Message:
    sender: int
    kind: str
    bits: int


@dataclass(frozen=True)
class Transcript:
    rounds: tuple[tuple[Message, ...], ...]
    metadata: dict = field(default_factory=dict)

    @property
    def total_bits(self) -> int:
        return sum(msg.bits for rnd in self.rounds for msg in rnd)

    @property
    def round_count(self) -> int:
        return len(self.rounds)


@dataclass(frozen=True)
class DecisionSpec:
    """Threshold ``X`` and the decision rule's factor (``None``: the protocol's own)."""

    X: object
    alpha: object = None

    def __post_init__(self):
        if not self.X > 0:
            raise DecisionSpecError(f"X must be positive, got {self.X}")
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise DecisionSpecError(f"alpha must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class ProtocolOutcome:
    protocol: str
    allocation: Allocation | None
    welfare: object
    expected_welfare: object
    transcript: Transcript
    guarantee: Fraction
    answer: bool | None = None
    sketches: tuple[Sketch, ...] = ()


def guarantee(protocol: str, k: int | None = None) -> Fraction:
    """The approximation factor each protocol is proven to achieve."""
    table = {
        "p1": lambda: Fraction(2, 3),
        "p2": lambda: Fraction(3, 5),
        "p3": lambda: Fraction(3, 4) - Fraction(1, k),
        "p4": lambda: Fraction(1, 2) - Fraction(1, k),
        "p5": lambda: Fraction(23, 32) - Fraction(1, k),
        "p6": lambda: Fraction(3, 4) - Fraction(1, k),
        "baseline": lambda: Fraction(1, 2),
    }
    return table[protocol]()


# -- helpers --------------------------------------------------------------------------


def _clause_bits(v: Valuation, value_bits: int) -> int:
    return v.m if v.is_binary else v.m * value_bits


def _owner_bits(n: int) -> int:
    return max(1, math.ceil(math.log2(n)))


def _require_binary(*vals: Valuation) -> None:
    for v in vals:
        if not v.is_binary:
            raise NotBinaryError("this protocol is defined for binary XOS valuations")


def _check_pair(v1: Valuation, v2: Valuation) -> None:
    if v1.m != v2.m:
        raise DimensionError(f"item counts differ: {v1.m} != {v2.m}")


def _reported(x) -> Valuation:
    if isinstance(x, Sketch):
        return x.clauses
    if isinstance(x, Clause):
        return Valuation(x.values[None, :])
    return x


def _mean(values: Sequence):
    if all(isinstance(x, (int, Fraction)) for x in values):
        return Fraction(sum(values), len(values))
    return float(sum(values)) / len(values)


def _pick(rng_seed, k: int) -> int:
    return int(np.random.default_rng(rng_seed).integers(k))


def _decision_alpha(spec: DecisionSpec | None, default: Fraction) -> Fraction:
    if spec is None:
        raise DecisionSpecError("decision mode needs a DecisionSpec")
    if spec.alpha is None:
        return default
    if spec.alpha > default:
        raise DecisionSpecError(f"alpha={spec.alpha} exceeds the protocol's guarantee {default}")
    return spec.alpha


def _check_mode(mode: str) -> None:
    if mode not in ("alloc", "decision"):
        raise ValueError(f"mode must be 'alloc' or 'decision', got {mode!r}")


# -- wrap-ups ---------------------------------------------------------------------------


def wrapup_alice_only(sketch, j: int) -> Allocation:
    """Alice receives the support of reported clause ``j``; Bob gets the rest."""
    b = _reported(sketch).clause(j)
    if not b.binary:
        raise NotBinaryError("alice-only wrap-up needs binary clauses")
    return Allocation.from_bundle(b.support)


def _best_pair(sketch_a, sketch_b) -> tuple[int, int, object]:
    A, B = _reported(sketch_a), _reported(sketch_b)
    W = pair_welfare_matrix(A, B)
    flat = W.ravel()
    r = int(np.flatnonzero(flat == flat.max())[0])
    j, l = divmod(r, W.shape[1])
    return j, l, _scalar(W[j, l])


def wrapup_best_known(sketch_a, sketch_b) -> Allocation:
    """Per-item-max split of the reported clause pair with the highest ``SW*``."""
    j, l, _ = _best_pair(sketch_a, sketch_b)
    return sw_star_additive_pair(_reported(sketch_a).clause(j), _reported(sketch_b).clause(l)).allocation


def wrapup_best_known_decision(sketch_a, sketch_b, spec: DecisionSpec) -> bool:
    """``True`` ("yes") iff the best reported pair reaches ``alpha * X`` (inclusive)."""
    if spec.alpha is None:
        raise DecisionSpecError("wrap-up needs an explicit alpha")
    return _best_pair(sketch_a, sketch_b)[2] >= spec.alpha * spec.X


# -- protocols ---------------------------------------------------------------------------


def run_protocol1(v1: Valuation, v2: Valuation, seed=None) -> ProtocolOutcome:
    """Alice sends one of: her largest clause, or either clause of her best-union pair."""
    _require_binary(v1, v2)
    _check_pair(v1, v2)
    totals = v1.totals
    b1 = int(np.flatnonzero(totals == totals.max())[0])
    b2, b3, _ = _best_pair(v1, v1)
    picks = (b1, b2, b3)
    values = [alice_only_allocation(v1.clause(j), v2).value for j in picks]
    coin = _pick(seed, 3)
    alloc = alice_only_allocation(v1.clause(picks[coin]), v2).allocation
    transcript = Transcript(((Message(0, "clause", v1.m),),), {"picks": picks, "coin": coin})
    return ProtocolOutcome(
        protocol="p1",
        allocation=alloc,
        welfare=alloc.welfare([v1, v2]),
        expected_welfare=_mean(values),
        transcript=transcript,
        guarantee=guarantee("p1"),
    )


def _largest_and_pair(v: Valuation) -> Valuation:
    totals = v.totals
    b1 = int(np.flatnonzero(totals == totals.max())[0])
    b2, b3, _ = _best_pair(v, v)
    return v.select([b1, b2, b3])


def _best_known_outcome(name, v1, v2, rep1, rep2, transcript, mode, spec, default_alpha, sketches=()):
    if mode == "decision":
        alpha = _decision_alpha(spec, default_alpha)
        answer = wrapup_best_known_decision(rep1, rep2, DecisionSpec(spec.X, alpha))
        return ProtocolOutcome(name, None, None, None, transcript, default_alpha, answer, sketches)
    alloc = wrapup_best_known(rep1, rep2)
    w = alloc.welfare([v1, v2])
    return ProtocolOutcome(name, alloc, w, w, transcript, default_alpha, None, sketches)


def run_protocol2(
    v1: Valuation,
    v2: Valuation,
    mode: str = "alloc",
    spec: DecisionSpec | None = None,
    value_bits: int = DEFAULT_VALUE_BITS,
) -> ProtocolOutcome:
    """Each side reports its largest clause plus its best-union clause pair."""
    _check_mode(mode)
    _check_pair(v1, v2)
    rep1, rep2 = _largest_and_pair(v1), _largest_and_pair(v2)
    transcript = Transcript(
        ((Message(0, "clauses", 3 * _clause_bits(v1, value_bits)), Message(1, "clauses", 3 * _clause_bits(v2, value_bits))),)
    )
    return _best_known_outcome("p2", v1, v2, rep1, rep2, transcript, mode, spec, guarantee("p2"))


def run_protocol3(
    v1: Valuation, v2: Valuation, k: int, seed=None, max_candidates: int = DEFAULT_MAX_CANDIDATES
) -> ProtocolOutcome:
    """Alice draws one clause of her (k, 1/2)-sketch; alice-only wrap-up."""
    _require_binary(v1, v2)
    _check_pair(v1, v2)
    if k < 2:
        raise ValueError("protocol 3 needs k >= 2")
    sk = compute_sketch(v1, SketchParams(k, Fraction(1, 2)), max_candidates)
    values = [alice_only_allocation(v1.clause(j), v2).value for j in sk.clause_indices]
    coin = _pick(seed, k)
    alloc = wrapup_alice_only(sk, coin)
    transcript = Transcript(((Message(0, "clause", v1.m),),), {"sketch": sk.method, "coin": coin})
    return ProtocolOutcome(
        protocol="p3",
        allocation=alloc,
        welfare=alloc.welfare([v1, v2]),
        expected_welfare=_mean(values),
        transcript=transcript,
        guarantee=guarantee("p3", k),
        sketches=(sk,),
    )


def run_protocol4(
    vals: Sequence[Valuation],
    k: int,
    seed=None,
    exact: bool = True,
    max_paths: int = DEFAULT_MAX_PATHS,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> ProtocolOutcome:
    """Players 1..n-1 in turn take one random clause of their sketch on the items left.

    With ``exact=True`` the expectation is computed over all ``k**(n-1)`` coin
    paths (identical sub-problems are shared); otherwise ``expected_welfare``
    is ``None`` and only the seeded run is reported.
    """
    vals = list(vals)
    _require_binary(*vals)
    n = len(vals)
    m = vals[0].m
    for v in vals[1:]:
        _check_pair(vals[0], v)
    if k < 2:
        raise ValueError("protocol 4 needs k >= 2")
    if n < 2:
        raise ValueError("protocol 4 needs at least two players")
    params = SketchParams(k, Fraction(1, 2))
    paths = k ** (n - 1)
    if exact and paths > max_paths:
        raise BudgetExceededError(f"{paths} coin paths exceed max_paths={max_paths}")

    cache: dict = {}
    methods: set = set()

    def sketch_of(player: int, left: np.ndarray) -> Sketch:
        key = (player, left.tobytes())
        if key not in cache:
            sk = compute_sketch(vals[player].restrict(left), params, max_candidates)
            methods.add(sk.method)
            cache[key] = sk
        return cache[key]

    memo: dict = {}

    def expect(player: int, left: np.ndarray):
        # expected welfare collected by players >= player on items `left`
        if player == n - 1:
            return vals[player].value(left)
        key = (player, left.tobytes())
        if key not in memo:
            sk = sketch_of(player, left)
            branch = []
            for j in sk.clause_indices:
                take = sk.valuation.matrix[j]
                branch.append(int(take.sum()) + expect(player + 1, left & ~take))
            memo[key] = Fraction(sum(branch), k)
        return memo[key]

    rng = np.random.default_rng(seed)
    owner = np.full(m, n - 1, dtype=np.int64)
    left = np.ones(m, dtype=bool)
    coins = []
    for player in range(n - 1):
        sk = sketch_of(player, left)
        j = int(rng.integers(k))
        coins.append(j)
        take = sk.valuation.matrix[sk.clause_indices[j]]
        owner[take] = player
        left = left & ~take
    alloc = Allocation(owner, n=n)
    expected = expect(0, np.ones(m, dtype=bool)) if exact else None
    transcript = Transcript(
        tuple((Message(p, "clause", m),) for p in range(n - 1)),
        {"sketch": "+".join(sorted(methods)), "coins": tuple(coins)},
    )
    return ProtocolOutcome(
        protocol="p4",
        allocation=alloc,
        welfare=alloc.welfare(vals),
        expected_welfare=expected,
        transcript=transcript,
        guarantee=guarantee("p4", k),
    )


def run_protocol5(
    v1: Valuation,
    v2: Valuation,
    k: int,
    mode: str = "alloc",
    spec: DecisionSpec | None = None,
    value_bits: int = DEFAULT_VALUE_BITS,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> ProtocolOutcome:
    """Both sides send (k, 1/3)-sketches; best-known wrap-up."""
    _check_mode(mode)
    _check_pair(v1, v2)
    params = SketchParams(k, Fraction(1, 3))
    s1 = compute_sketch(v1, params, max_candidates)
    s2 = compute_sketch(v2, params, max_candidates)
    transcript = Transcript(
        ((Message(0, "sketch", k * _clause_bits(v1, value_bits)), Message(1, "sketch", k * _clause_bits(v2, value_bits))),),
        {"sketch": f"{s1.method}/{s2.method}"},
    )
    return _best_known_outcome("p5", v1, v2, s1, s2, transcript, mode, spec, guarantee("p5", k), (s1, s2))


def run_protocol6(
    v1: Valuation,
    v2: Valuation,
    k: int,
    mode: str = "alloc",
    spec: DecisionSpec | None = None,
    value_bits: int = DEFAULT_VALUE_BITS,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
) -> ProtocolOutcome:
    """Alice sends her (k, 1/2)-sketch to Bob; Bob answers with the best split against one clause."""
    _check_mode(mode)
    _check_pair(v1, v2)
    if k < 2:
        raise ValueError("protocol 6 needs k >= 2")
    sk = compute_sketch(v1, SketchParams(k, Fraction(1, 2)), max_candidates)
    W = pair_welfare_matrix(sk.clauses, v2)
    best = W.max(axis=1)
    j = int(np.flatnonzero(best == best.max())[0])
    value = _scalar(best[j])
    transcript = Transcript(
        (
            (Message(0, "sketch", k * _clause_bits(v1, value_bits)),),
            (Message(1, "allocation+value", v1.m * _owner_bits(2) + value_bits),),
        ),
        {"sketch": sk.method, "branch": j},
    )
    g = guarantee("p6", k)
    if mode == "decision":
        alpha = _decision_alpha(spec, g)
        return ProtocolOutcome("p6", None, None, None, transcript, g, value >= alpha * spec.X, (sk,))
    l = int(np.flatnonzero(W[j] == W[j].max())[0])
    alloc = sw_star_additive_pair(sk.clauses.clause(j), v2.clause(l)).allocation
    w = alloc.welfare([v1, v2])
    return ProtocolOutcome("p6", alloc, w, w, transcript, g, None, (sk,))


def baseline_grand_bundle(vals: Sequence[Valuation], seed=None) -> ProtocolOutcome:
    """Everything to one uniformly random player."""
    vals = list(vals)
    if len(vals) != 2:
        raise ValueError("the grand-bundle baseline is two-player")
    _check_pair(*vals)
    m = vals[0].m
    coin = _pick(seed, 2)
    alloc = Allocation(np.full(m, coin, dtype=np.int64), n=2)
    full = ItemSet.full(m)
    return ProtocolOutcome(
        protocol="baseline",
        allocation=alloc,
        welfare=alloc.welfare(vals),
        expected_welfare=_mean([vals[0].value(full), vals[1].value(full)]),
        transcript=Transcript(((Message(coin, "grab", 1),),)),
        guarantee=guarantee("baseline"),
    )
