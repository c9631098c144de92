import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _strategies import bxos, xos
from xosketch import (
    BudgetExceededError,
    NotBinaryError,
    SketchParams,
    Valuation,
    compute_sketch,
    is_swap_optimal,
    objective_binary,
    objective_general,
    sketch_exact,
    sketch_local_search,
    verify_exchange_lemma_binary,
    verify_exchange_lemma_general,
)
from xosketch.sketch import Sketch, swap_gains

alphas = st.sampled_from([Fraction(0), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2)])


def unit_step_objective(v, indices, alpha):
    """Definition evaluated on unit steps of ``u`` (integer-valued clauses only)."""
    k = len(indices)
    rows = [[int(x) for x in v.matrix[j]] for j in indices]
    top = max((max(r) for r in rows), default=0)
    total = Fraction(0)
    for i in range(v.m):
        for u in range(1, top + 1):
            x = Fraction(sum(1 for r in rows if r[i] >= u), k)
            total += x - alpha * x * x
    return total


def brute_sketch(v, k, alpha):
    best = None
    for combo in itertools.combinations_with_replacement(range(v.t), k):
        val = unit_step_objective(v, combo, alpha)
        if best is None or val > best[0]:
            best = (val, combo)
    return best


def test_objective_examples(v_small):
    v = Valuation.from_sets(3, [{0, 1}, {1, 2}])
    assert objective_binary(v, [0, 1], Fraction(1, 2)) == Fraction(5, 4)
    assert objective_binary(v, [1], Fraction(1, 3)) == 2 * Fraction(2, 3)
    assert objective_binary(v, [0, 1, 1], 0) == Fraction(6, 3)


def test_objective_general_examples():
    v = Valuation([[2, 0], [1, 0]])
    assert objective_general(v, [0], Fraction(1, 3)) == Fraction(4, 3)
    assert objective_general(v, [0, 1], 0) == Fraction(3, 2)
    b = Valuation.from_sets(3, [{0, 1}, {1, 2}])
    assert objective_general(b, [0, 1], Fraction(1, 2)) == objective_binary(b, [0, 1], Fraction(1, 2))


def test_objective_general_fractional_breakpoints():
    v = Valuation.exact([["1/2", 0], ["3/2", 0]])
    # x_u = 1 on (0, 1/2], 1/2 on (1/2, 3/2]
    assert objective_general(v, [0, 1], Fraction(1, 2)) == Fraction(1, 2) * Fraction(1, 2) + 1 * Fraction(3, 8)


def test_objective_binary_rejects_xos():
    with pytest.raises(NotBinaryError):
        objective_binary(Valuation([[2, 1]]), [0], Fraction(1, 2))


def test_sketch_exact_example(v_small):
    sk = sketch_exact(v_small, SketchParams(2, Fraction(1, 2)))
    assert sk.clause_indices == (0, 1)
    assert sk.objective == Fraction(9, 8)
    assert sk.coverage == (Fraction(1, 2),) * 3


def test_sketch_k1_picks_largest(v_small):
    sk = sketch_exact(v_small, SketchParams(1, Fraction(1, 2)))
    assert sk.clause_indices == (0,)
    tie = Valuation.from_sets(3, [{0}, {1}, {2}])
    assert sketch_exact(tie, SketchParams(1, Fraction(1, 2))).clause_indices == (0,)


def test_single_clause_repeats():
    v = Valuation.from_sets(4, [{0, 2}])
    assert sketch_exact(v, SketchParams(5)).clause_indices == (0,) * 5
    assert sketch_local_search(v, SketchParams(5)).clause_indices == (0,) * 5


def test_local_search_example(v_small):
    sk = sketch_local_search(v_small, SketchParams(2, Fraction(1, 2)))
    assert sk.clause_indices == (0, 1) and sk.objective == Fraction(9, 8)


def test_sketch_params_validation():
    with pytest.raises(ValueError):
        SketchParams(0)
    with pytest.raises(ValueError):
        SketchParams(2, Fraction(3, 4))
    assert SketchParams(2, 0.5).alpha == Fraction(1, 2)


def test_budget():
    v = Valuation.from_sets(3, [{i % 3} for i in range(30)])
    with pytest.raises(BudgetExceededError):
        sketch_exact(v, SketchParams(6), max_candidates=1000)
    assert compute_sketch(v, SketchParams(6), max_candidates=1000).method == "local_search"


def test_levels():
    v = Valuation([[2, 0], [1, 0]])
    sk = Sketch(v, (0, 1), objective_general(v, (0, 1), 0), SketchParams(2, Fraction(0)))
    assert sk.levels(0) == [(1, Fraction(1)), (2, Fraction(1, 2))]
    with pytest.raises(NotBinaryError):
        sk.counts


@settings(max_examples=60, deadline=None)
@given(bxos(max_m=5, max_t=4), st.integers(1, 3), alphas)
def test_exact_matches_enumeration_bxos(v, k, alpha):
    sk = sketch_exact(v, SketchParams(k, alpha))
    best, _ = brute_sketch(v, k, alpha)
    assert sk.objective == best
    assert objective_binary(v, sk.clause_indices, alpha) == best


@settings(max_examples=60, deadline=None)
@given(xos(max_m=4, max_t=4), st.integers(1, 3), alphas)
def test_exact_matches_enumeration_xos(v, k, alpha):
    sk = sketch_exact(v, SketchParams(k, alpha))
    best, _ = brute_sketch(v, k, alpha)
    assert sk.objective == best
    assert objective_general(v, sk.clause_indices, alpha) == best


@settings(max_examples=60, deadline=None)
@given(xos(max_m=5, max_t=6), st.integers(1, 5), alphas, st.integers(0, 2**16))
def test_local_search_is_swap_optimal(v, k, alpha, seed):
    params = SketchParams(k, alpha)
    sk = sketch_local_search(v, params, seed=seed)
    assert is_swap_optimal(v, sk.clause_indices, params)
    assert sk.objective == objective_general(v, sk.clause_indices, alpha)
    assert max(swap_gains(v, sk.clause_indices, params).ravel()) <= 0


@settings(max_examples=40, deadline=None)
@given(bxos(max_m=5, max_t=5), st.integers(1, 4), alphas, st.data())
def test_swap_gains_match_reevaluation(v, k, alpha, data):
    params = SketchParams(k, alpha)
    idx = data.draw(st.lists(st.integers(0, v.t - 1), min_size=k, max_size=k))
    gains = swap_gains(v, idx, params)
    base = objective_binary(v, idx, alpha)
    for p in range(k):
        for c in range(v.t):
            trial = list(idx)
            trial[p] = c
            assert gains[p, c] == objective_binary(v, trial, alpha) - base


@settings(max_examples=80, deadline=None)
@given(bxos(max_m=6, max_t=6), st.integers(1, 4), st.sampled_from([Fraction(1, 3), Fraction(1, 2)]))
def test_exchange_lemma_binary(v, k, alpha):
    params = SketchParams(k, alpha)
    for sk in (sketch_exact(v, params), sketch_local_search(v, params)):
        b = verify_exchange_lemma_binary(sk, v, params)
        g = verify_exchange_lemma_general(sk, v, params)
        assert b.passed and g.passed
        assert b.slacks == g.slacks


@settings(max_examples=60, deadline=None)
@given(xos(max_m=5, max_t=5), st.integers(1, 4), st.sampled_from([Fraction(1, 3), Fraction(1, 2)]))
def test_exchange_lemma_general(v, k, alpha):
    params = SketchParams(k, alpha)
    for sk in (sketch_exact(v, params), sketch_local_search(v, params)):
        assert verify_exchange_lemma_general(sk, v, params).passed


def test_exchange_lemma_detects_bad_sketch():
    # reporting only the tiny clause is not swap-optimal and the inequality fails for the big one
    v = Valuation.from_sets(6, [range(6), {0}])
    params = SketchParams(2, Fraction(1, 2))
    bad = Sketch(v, (1, 1), objective_binary(v, (1, 1), params.alpha), params, "manual", False)
    rep = verify_exchange_lemma_binary(bad, v, params)
    assert not rep.passed and rep.worst_clause == 0


def test_exchange_lemma_full_multiset_alpha_zero():
    # k = t with every clause once and alpha = 0: slack = (1/k) sum_j a_j([m]) - a([m])
    v = Valuation([[3, 0, 1], [1, 2, 2], [0, 0, 1]])
    params = SketchParams(3, Fraction(0))
    sk = sketch_exact(v, params)
    full = Sketch(v, (0, 1, 2), objective_general(v, (0, 1, 2), 0), params)
    rep = verify_exchange_lemma_general(full, v, params)
    mean = Fraction(4 + 5 + 1, 3)
    assert list(rep.slacks) == [mean - 4, mean - 5, mean - 1]
    assert verify_exchange_lemma_general(sk, v, params).passed


def test_float_mode_agrees():
    rows = np.array([[0.5, 1.5, 0.0], [1.0, 0.25, 2.0]])
    vf = Valuation(rows)
    ve = Valuation.exact([["1/2", "3/2", 0], [1, "1/4", 2]])
    params = SketchParams(3, Fraction(1, 3))
    a, b = sketch_exact(vf, params), sketch_exact(ve, params)
    assert a.clause_indices == b.clause_indices
    assert a.objective == pytest.approx(float(b.objective), rel=1e-12)
    assert verify_exchange_lemma_general(a, vf, params).passed
