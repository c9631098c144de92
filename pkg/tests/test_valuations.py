import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _strategies import bxos, xos
from xosketch import (
    Allocation,
    Clause,
    DimensionError,
    Instance,
    ItemSet,
    Valuation,
    argmax_clause,
    dump_instance,
    eval_clause,
    eval_valuation,
    load_instance,
)


def test_eval_clause_examples():
    assert eval_clause(Clause([1, 0, 1]), {0, 2}) == 2
    assert eval_clause(Clause([1, 0, 1]), []) == 0
    assert eval_clause(Clause([2, 0, 1]), [0, 1, 2]) == 3


def test_eval_valuation_examples(v_small):
    assert eval_valuation(v_small, {2}) == 1
    assert eval_valuation(v_small, {0, 1, 2}) == 2
    assert eval_valuation(v_small, set()) == 0


def test_argmax_clause_examples(v_small):
    assert argmax_clause(v_small, {2}) == 1
    assert argmax_clause(v_small, set()) == 0
    dup = Valuation.from_sets(3, [{0, 1}, {0, 1}])
    assert argmax_clause(dup, {0}) == 0


def test_itemset_ops():
    a = ItemSet.from_indices(5, [0, 1, 2])
    b = ItemSet.from_indices(5, [2, 3])
    assert (a & b).indices == (2,)
    assert (a | b).indices == (0, 1, 2, 3)
    assert (a - b).indices == (0, 1)
    assert a.complement().indices == (3, 4)
    assert len(a) == 3 and 4 not in a
    assert ItemSet.from_indices(5, [2]) <= a
    with pytest.raises(ValueError):
        ItemSet.from_indices(3, [3])
    with pytest.raises(DimensionError):
        a & ItemSet.empty(4)


def test_dtype_modes():
    assert Valuation.from_sets(2, [{0}]).kind == "BXOS"
    v = Valuation([[2, 0], [1, 1]])
    assert v.kind == "XOS" and v.exact_arithmetic
    assert v.grand_value == 2
    ex = Valuation.exact([["1/2", 1], [0, "3/4"]])
    assert ex.matrix.dtype == object
    assert ex.value({0, 1}) == Fraction(3, 2)
    assert not Valuation([[0.5, 1.0]]).exact_arithmetic


def test_negative_values_rejected():
    with pytest.raises(ValueError):
        Valuation([[1, -1]])
    with pytest.raises(ValueError):
        Valuation(np.zeros((0, 3), dtype=bool))


def test_valuation_arrays_are_readonly(v_small):
    with pytest.raises(ValueError):
        v_small.matrix[0, 0] = False
    with pytest.raises(ValueError):
        v_small.gram[0, 0] = 7


def test_restrict_and_select(v_small):
    r = v_small.restrict({1, 2})
    assert r.value({0, 1, 2}) == 1
    s = v_small.select([1, 1, 0])
    assert s.t == 3 and s.clause(0) == Clause.from_set(3, [2])


def test_allocation_welfare(v_small):
    v2 = Valuation.from_sets(3, [{1, 2}])
    alloc = Allocation([0, 0, 1], n=2)
    assert alloc.welfare([v_small, v2]) == 3
    assert alloc.bundle(1).indices == (2,)
    with pytest.raises(ValueError):
        Allocation([0, 2], n=2)


@given(bxos())
def test_gram_is_min_overlap(v):
    m64 = v.matrix.astype(np.int64)
    assert np.array_equal(v.gram, m64 @ m64.T)
    assert np.array_equal(np.diag(v.gram), v.totals)


@given(xos())
def test_xos_is_monotone_and_subadditive(v):
    # direct evaluation over every subset pair of a small ground set
    m = v.m
    subsets = [frozenset(s) for r in range(m + 1) for s in itertools.combinations(range(m), r)]
    value = {S: eval_valuation(v, S) for S in subsets}
    for S in subsets:
        for T in subsets:
            if S <= T:
                assert value[S] <= value[T]
            assert value[S | T] <= value[S] + value[T]


@given(xos(), st.data())
def test_argmax_attains_value(v, data):
    S = data.draw(st.sets(st.integers(0, v.m - 1)))
    j = argmax_clause(v, S)
    assert eval_clause(v.clause(j), S) == eval_valuation(v, S)


@settings(max_examples=50)
@given(bxos(), xos())
def test_json_round_trip(vb, vx):
    if vb.m != vx.m:
        vx = Valuation(np.ones((1, vb.m), dtype=np.int64) * 2)
    inst = Instance((vb, vx), {"construction": "test", "seed": 3})
    text = dump_instance(inst)
    back = load_instance(text)
    assert dump_instance(back) == text
    assert back.players[0].is_binary
    assert np.array_equal(back.players[1].matrix, vx.matrix)


def test_json_fractions_round_trip(tmp_path):
    inst = Instance((Valuation.exact([["1/3", 2]]), Valuation.exact([[1, "5/2"]])))
    path = tmp_path / "x.json"
    dump_instance(inst, path)
    back = load_instance(path)
    assert back.players[0].value({0}) == Fraction(1, 3)
    assert back.players[1].value({1}) == Fraction(5, 2)


def test_json_rejects_unknown_keys():
    with pytest.raises(ValueError):
        load_instance('{"m": 1, "players": [], "extra": 1}')
    with pytest.raises(DimensionError):
        load_instance('{"m": 2, "players": [{"clauses": [[1, 2, 3]]}]}')
