"""Items, additive clauses, XOS valuations and allocations.

A valuation is stored as a ``(t, m)`` matrix whose rows are its clauses.  The
matrix dtype encodes the arithmetic mode:

* ``bool``    -- binary clauses (BXOS); all derived quantities are integers.
* ``int64``   -- integral clause values; exact.
* ``object``  -- :class:`fractions.Fraction` entries (exact-rational mode).
* ``float64`` -- everything else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Integral, Rational
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError

__all__ = [
    "ItemSet",
    "Clause",
    "Valuation",
    "Allocation",
    "Instance",
    "eval_clause",
    "eval_valuation",
    "argmax_clause",
    "cross_min_gram",
    "is_exact",
    "load_instance",
    "dump_instance",
    "instance_from_dict",
    "instance_to_dict",
]

# float32 GEMM stays exact while every partial sum is an integer below 2**24
_F32_EXACT = 1 << 24
_CHUNK_CELLS = 1 << 23


def _scalar(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def is_exact(x) -> bool:
    """True for ints and Fractions (values that compare without rounding)."""
    return isinstance(x, (Integral, Rational)) and not isinstance(x, float)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _to_fraction_array(rows) -> np.ndarray:
    out = np.empty((len(rows), len(rows[0]) if len(rows) else 0), dtype=object)
    for j, r in enumerate(rows):
        for i, x in enumerate(r):
            out[j, i] = Fraction(x)
    return out


def _normalize_matrix(rows, exact: bool = False) -> np.ndarray:
    """Coerce clause rows to the canonical dtype (see module docstring)."""
    if isinstance(rows, np.ndarray) and rows.dtype != object:
        arr = rows
        if arr.ndim != 2:
            raise DimensionError("clause matrix must be two-dimensional")
        if arr.dtype == bool:
            return arr.copy()
    else:
        rows = [list(r) for r in rows]
        if len({len(r) for r in rows}) > 1:
            raise DimensionError("all clauses must have the same length")
        if exact or any(isinstance(x, Fraction) for r in rows for x in r):
            arr = _to_fraction_array(rows)
        else:
            arr = np.array(rows)
            if arr.dtype == object:
                raise TypeError("clause values must be numbers")
    if arr.ndim != 2:
        raise DimensionError("all clauses must have the same length")
    if arr.shape[0] == 0:
        raise ValueError("a valuation needs at least one clause")
    if arr.dtype == object:
        if any(x < 0 for x in arr.flat):
            raise ValueError("clause values must be non-negative")
        if all(x == 0 or x == 1 for x in arr.flat):
            return arr.astype(bool)
        if not exact and all(x.denominator == 1 for x in arr.flat):
            return arr.astype(np.int64)
        return arr
    if arr.dtype.kind not in "biuf":
        raise TypeError(f"unsupported clause value type {arr.dtype}")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValueError("clause values must be finite")
    if np.any(arr < 0):
        raise ValueError("clause values must be non-negative")
    if np.all((arr == 0) | (arr == 1)):
        return arr.astype(bool)
    if exact:
        return _to_fraction_array(arr.tolist())
    if arr.dtype.kind in "iu":
        return arr.astype(np.int64)
    if np.all(arr == np.round(arr)) and np.all(arr < 2**53):
        return arr.astype(np.int64)
    return arr.astype(np.float64)


@dataclass(frozen=True, eq=False)
class ItemSet:
    """A subset of the items ``0..m-1`` held as a dense boolean mask."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool).copy()
        if mask.ndim != 1:
            raise DimensionError("item-set mask must be one-dimensional")
        object.__setattr__(self, "mask", _readonly(mask))

    @classmethod
    def from_indices(cls, m: int, indices: Iterable[int]) -> "ItemSet":
        mask = np.zeros(m, dtype=bool)
        idx = list(indices)
        if idx:
            idx_arr = np.asarray(idx, dtype=np.int64)
            if idx_arr.min() < 0 or idx_arr.max() >= m:
                raise ValueError(f"item index out of range for m={m}")
            mask[idx_arr] = True
        return cls(mask)

    @classmethod
    def full(cls, m: int) -> "ItemSet":
        return cls(np.ones(m, dtype=bool))

    @classmethod
    def empty(cls, m: int) -> "ItemSet":
        return cls(np.zeros(m, dtype=bool))

    @property
    def m(self) -> int:
        return int(self.mask.shape[0])

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.mask))

    def complement(self) -> "ItemSet":
        return ItemSet(~self.mask)

    def __and__(self, other: "ItemSet") -> "ItemSet":
        _check_m(self.m, other.m)
        return ItemSet(self.mask & other.mask)

    def __or__(self, other: "ItemSet") -> "ItemSet":
        _check_m(self.m, other.m)
        return ItemSet(self.mask | other.mask)

    def __sub__(self, other: "ItemSet") -> "ItemSet":
        _check_m(self.m, other.m)
        return ItemSet(self.mask & ~other.mask)

    def __le__(self, other: "ItemSet") -> bool:
        _check_m(self.m, other.m)
        return bool(np.all(~self.mask | other.mask))

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return 0 <= i < self.m and bool(self.mask[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ItemSet):
            return NotImplemented
        return self.m == other.m and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self) -> int:
        return hash((self.m, self.mask.tobytes()))

    def __repr__(self) -> str:
        return f"ItemSet(m={self.m}, {set(self.indices)})"


def _check_m(a: int, b: int) -> None:
    if a != b:
        raise DimensionError(f"item counts differ: {a} != {b}")


def _as_mask(S, m: int) -> np.ndarray:
    if isinstance(S, ItemSet):
        _check_m(m, S.m)
        return S.mask
    mask = np.asarray(S)
    if mask.dtype != bool:
        return ItemSet.from_indices(m, mask.tolist()).mask
    _check_m(m, mask.shape[0])
    return mask


@dataclass(frozen=True, eq=False)
class Clause:
    """One additive function: per-item values ``values[i] >= 0``."""

    values: np.ndarray

    def __post_init__(self):
        vals = self.values
        if isinstance(vals, np.ndarray):
            if vals.ndim != 1:
                raise DimensionError("clause values must be one-dimensional")
            vals = _normalize_matrix(vals[None, :])[0]
        else:
            vals = _normalize_matrix([list(vals)])[0]
        object.__setattr__(self, "values", _readonly(vals.copy()))

    @classmethod
    def from_set(cls, m: int, items: Iterable[int]) -> "Clause":
        return cls(ItemSet.from_indices(m, items).mask)

    @property
    def m(self) -> int:
        return int(self.values.shape[0])

    @property
    def binary(self) -> bool:
        return self.values.dtype == bool

    @property
    def support(self) -> ItemSet:
        return ItemSet(self.values > 0 if self.values.dtype != bool else self.values)

    @property
    def total(self):
        return _scalar(self.values.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Clause):
            return NotImplemented
        return self.m == other.m and bool(np.all(self.values == other.values))

    def __hash__(self) -> int:
        return hash(tuple(_scalar(x) for x in self.values))

    def __repr__(self) -> str:
        if self.binary:
            return f"Clause(set={list(self.support.indices)}, m={self.m})"
        return f"Clause({[_scalar(x) for x in self.values]})"


@dataclass(frozen=True, eq=False)
class Valuation:
    """An XOS valuation ``v(S) = max_j sum_{i in S} matrix[j, i]``.

    ``kind`` is ``"BXOS"`` when every clause is binary, else ``"XOS"``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        mat = _normalize_matrix(self.matrix)
        if mat.shape[0] == 0:
            raise ValueError("a valuation needs at least one clause")
        object.__setattr__(self, "matrix", _readonly(mat))

    # -- construction -------------------------------------------------------
    @classmethod
    def from_sets(cls, m: int, sets: Iterable[Iterable[int]]) -> "Valuation":
        sets = list(sets)
        mat = np.zeros((len(sets), m), dtype=bool)
        for j, s in enumerate(sets):
            mat[j] = ItemSet.from_indices(m, s).mask
        return cls(mat)

    @classmethod
    def from_clauses(cls, clauses: Sequence) -> "Valuation":
        rows = [c.values if isinstance(c, Clause) else c for c in clauses]
        if rows and all(isinstance(r, np.ndarray) and r.dtype == bool for r in rows):
            return cls(np.vstack(rows))
        return cls(_normalize_matrix([list(r) for r in rows]))

    @classmethod
    def exact(cls, rows) -> "Valuation":
        """Build in exact-rational mode (entries become Fractions)."""
        return cls(_normalize_matrix(rows, exact=True))

    # -- shape ----------------------------------------------------------------
    @property
    def m(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def t(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def is_binary(self) -> bool:
        return self.matrix.dtype == bool

    @property
    def kind(self) -> str:
        return "BXOS" if self.is_binary else "XOS"

    @property
    def exact_arithmetic(self) -> bool:
        return self.matrix.dtype != np.float64

    @property
    def clauses(self) -> tuple[Clause, ...]:
        return tuple(Clause(row) for row in self.matrix)

    def clause(self, j: int) -> Clause:
        return Clause(self.matrix[j])

    # -- cached aggregates ----------------------------------------------------
    @cached_property
    def totals(self) -> np.ndarray:
        """Per-clause value of the grand bundle, ``a_j([m])``."""
        tot = self.matrix.sum(axis=1)
        if self.matrix.dtype == bool:
            tot = tot.astype(np.int64)
        return _readonly(tot)

    @cached_property
    def gram(self) -> np.ndarray:
        """``gram[j, l] = sum_i min(a_j(i), a_l(i))`` (inner products when binary)."""
        return _readonly(cross_min_gram(self.matrix, self.matrix))

    @cached_property
    def grand_value(self):
        """``v([m])``."""
        return _scalar(self.totals.max())

    # -- queries ----------------------------------------------------------------
    def value(self, S):
        return eval_valuation(self, S)

    def restrict(self, S) -> "Valuation":
        """Same clauses with every item outside ``S`` zeroed."""
        mask = _as_mask(S, self.m)
        mat = self.matrix.copy()
        mat[:, ~mask] = False if mat.dtype == bool else 0
        return Valuation(mat)

    def select(self, indices: Sequence[int]) -> "Valuation":
        """The valuation whose clause list is ``clauses[indices]`` (repeats kept)."""
        return Valuation(self.matrix[np.asarray(indices, dtype=np.int64)])

    def to_exact(self) -> "Valuation":
        if self.matrix.dtype in (bool, object):
            return self
        return Valuation.exact(self.matrix.tolist())

    def __repr__(self) -> str:
        return f"Valuation(kind={self.kind}, m={self.m}, t={self.t})"


def cross_min_gram(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix of ``sum_i min(A[j, i], B[l, i])`` for all row pairs.

    Binary inputs go through a chunked float32 GEMM (exact below 2**24 items);
    small non-negative integers are decomposed into level indicators; anything
    else falls back to chunked broadcasting.
    """
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"item counts differ: {A.shape[1]} != {B.shape[1]}")
    m = A.shape[1]
    if A.dtype == bool and B.dtype == bool:
        return _bool_gram(A, B)
    if A.dtype.kind in "bi" and B.dtype.kind in "bi":
        top = int(max(A.max(initial=0), B.max(initial=0)))
        if top <= 64:
            out = np.zeros((A.shape[0], B.shape[0]), dtype=np.int64)
            for u in range(1, top + 1):
                out += _bool_gram(A >= u, B >= u)
            return out
    out = None
    step = max(1, _CHUNK_CELLS // max(1, B.shape[0] * m))
    parts = []
    for lo in range(0, A.shape[0], step):
        blk = np.minimum(A[lo:lo + step, None, :], B[None, :, :]).sum(axis=2)
        parts.append(blk)
    out = np.concatenate(parts, axis=0)
    if out.dtype == object:
        out = np.vectorize(Fraction, otypes=[object])(out)
    return out


def _bool_gram(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    m = A.shape[1]
    if m >= _F32_EXACT:
        return A.astype(np.int64) @ B.astype(np.int64).T
    out = np.zeros((A.shape[0], B.shape[0]), dtype=np.float64)
    step = max(1, _CHUNK_CELLS // max(1, A.shape[0] + B.shape[0]))
    same = A is B
    for lo in range(0, m, step):
        a = A[:, lo:lo + step].astype(np.float32)
        b = a if same else B[:, lo:lo + step].astype(np.float32)
        out += a @ b.T
    return np.rint(out).astype(np.int64)


# -- value queries ----------------------------------------------------------------


def eval_clause(a: Clause, S):
    """``a(S) = sum_{i in S} a[i]``."""
    mask = _as_mask(S, a.m)
    return _scalar(a.values[mask].sum())


def _clause_values(v: Valuation, mask: np.ndarray) -> np.ndarray:
    if v.matrix.dtype == bool:
        return (v.matrix & mask).sum(axis=1)
    return v.matrix[:, mask].sum(axis=1) if mask.any() else np.zeros(v.t, dtype=np.int64)


def eval_valuation(v: Valuation, S):
    """``v(S) = max_j a_j(S)``; zero on the empty set."""
    mask = _as_mask(S, v.m)
    return _scalar(_clause_values(v, mask).max())


def argmax_clause(v: Valuation, S) -> int:
    """Lowest clause index attaining ``v(S)``."""
    mask = _as_mask(S, v.m)
    vals = _clause_values(v, mask)
    return int(np.flatnonzero(vals == vals.max())[0])


@dataclass(frozen=True, eq=False)
class Allocation:
    """Total assignment ``owner[i]`` of every item to one of ``n`` players."""

    owner: np.ndarray
    n: int = 2

    def __post_init__(self):
        owner = np.asarray(self.owner, dtype=np.int64).copy()
        if owner.ndim != 1:
            raise DimensionError("owner vector must be one-dimensional")
        if owner.size and (owner.min() < 0 or owner.max() >= self.n):
            raise ValueError(f"owner indices must lie in 0..{self.n - 1}")
        object.__setattr__(self, "owner", _readonly(owner))

    @classmethod
    def from_bundle(cls, first: ItemSet) -> "Allocation":
        """Two-player allocation giving ``first`` to player 0, the rest to player 1."""
        return cls(np.where(first.mask, 0, 1), n=2)

    @property
    def m(self) -> int:
        return int(self.owner.shape[0])

    def bundle(self, player: int) -> ItemSet:
        return ItemSet(self.owner == player)

    def bundles(self) -> list[ItemSet]:
        return [self.bundle(p) for p in range(self.n)]

    def welfare(self, vals: Sequence[Valuation]):
        """Sum of each player's value for their bundle, recomputed from scratch."""
        if len(vals) != self.n:
            raise ValueError(f"expected {self.n} valuations, got {len(vals)}")
        return sum((eval_valuation(v, self.bundle(p)) for p, v in enumerate(vals)), 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Allocation):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.owner, other.owner))

    def __hash__(self) -> int:
        return hash((self.n, self.owner.tobytes()))

    def __repr__(self) -> str:
        return f"Allocation(n={self.n}, owner={self.owner.tolist()})"


# -- instance JSON ------------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    """A profile of valuations over a common item set, plus free-form provenance."""

    players: tuple[Valuation, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        players = tuple(self.players)
        if not players:
            raise ValueError("an instance needs at least one player")
        for v in players[1:]:
            _check_m(players[0].m, v.m)
        object.__setattr__(self, "players", players)

    @property
    def m(self) -> int:
        return self.players[0].m

    @property
    def n(self) -> int:
        return len(self.players)


def _json_value(x):
    x = _scalar(x)
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else x.numerator
    return x


def _parse_value(x):
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, bool):
        raise TypeError("clause values must be numbers")
    return x


def instance_to_dict(inst: Instance) -> dict:
    players = []
    for v in inst.players:
        if v.is_binary:
            clauses = [{"set": [int(i) for i in np.flatnonzero(row)]} for row in v.matrix]
        else:
            clauses = [[_json_value(x) for x in row] for row in v.matrix]
        players.append({"clauses": clauses})
    out = {"m": inst.m, "players": players}
    if inst.provenance:
        out["provenance"] = inst.provenance
    return out


def instance_from_dict(data: dict) -> Instance:
    unknown = set(data) - {"m", "players", "provenance"}
    if unknown:
        raise ValueError(f"unknown instance keys: {sorted(unknown)}")
    m = int(data["m"])
    players = []
    for p, player in enumerate(data["players"]):
        rows = []
        for c in player["clauses"]:
            if isinstance(c, dict):
                if set(c) != {"set"}:
                    raise ValueError(f"player {p}: clause objects must have exactly the key 'set'")
                rows.append(ItemSet.from_indices(m, c["set"]).mask.astype(np.int64).tolist())
            else:
                if len(c) != m:
                    raise DimensionError(f"player {p}: clause of length {len(c)} but m={m}")
                rows.append([_parse_value(x) for x in c])
        if not rows:
            raise ValueError(f"player {p} has no clauses")
        players.append(Valuation(_normalize_matrix(rows)))
    return Instance(tuple(players), dict(data.get("provenance", {})))


def dump_instance(inst: Instance, path=None) -> str:
    text = json.dumps(instance_to_dict(inst), sort_keys=True, separators=(",", ":")) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_instance(path_or_text) -> Instance:
    text = str(path_or_text)
    if not text.lstrip().startswith("{"):
        with open(path_or_text) as fh:
            text = fh.read()
    return instance_from_dict(json.loads(text))
