import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xosketch import DimensionError, F1Params, gen_appendix_g, gen_f1, stats_appendix_g, verify_f1_exclusion
from xosketch.hardness import appendix_g_pair_moments, check_f1_conditions, f1_to_instance, g_to_instance
from xosketch.welfare import pair_welfare_matrix, sw_star_xos_pair


# -- F1 parameters and conditions --------------------------------------------------------


def test_f1_params():
    p = F1Params(Fraction(1, 10), 400)
    assert p.gamma == pytest.approx(0.8415063509, abs=1e-9)
    assert p.t == 1280
    for probs in (p.p, p.q):
        assert all(0 < x < 1 for x in probs)
    # expected clause size sits between the size window's ends
    mean = sum(probs) * p.m / 4
    assert p.thresholds["size_lo"] <= mean <= p.thresholds["size_hi"]
    assert F1Params(0.1, 400).epsilon == Fraction(1, 10)


def test_f1_params_rejects():
    with pytest.raises(ValueError):
        F1Params(Fraction(1, 8), 400)
    with pytest.raises(DimensionError):
        F1Params(Fraction(1, 10), 402)


def _direct_conditions(params, r1, r2):
    """The seven inequalities evaluated with exact rationals, no precomputed thresholds."""
    e, m = params.epsilon, params.m
    half = m // 2

    def overlaps(a, b, same):
        g = a.astype(np.int64) @ b.astype(np.int64).T
        return g[~np.eye(len(a), dtype=bool)] if same else g.ravel()

    out = {}
    for name_s, name_h, name_o, mat, part in (("C1", "C3", "C5", r1, slice(0, half)), ("C2", "C4", "C6", r2, slice(half, m))):
        sizes = mat.sum(axis=1)
        out[name_s] = all((Fraction(1, 2) + 7 * e / 16) * m <= s <= (Fraction(1, 2) + e) * m for s in sizes)
        halves = mat[:, part].sum(axis=1)
        out[name_h] = all((Fraction(5, 16) + 7 * e / 16) * m <= h <= Fraction(m, 2) for h in halves)
        out[name_o] = all(o <= (Fraction(5, 16) + 3 * e / 4) * m for o in overlaps(mat, mat, True))
    out["C7"] = all(o >= Fraction(9, 32) * m for o in overlaps(r1, r2, False))
    return out


def test_condition_checker_matches_direct_evaluation():
    params = F1Params(Fraction(1, 10), 400)
    inst = gen_f1(params, seed=3, max_retries=2)
    r1, r2 = inst.v1.matrix[1:], inst.v2.matrix[1:]
    res = {c.name: c.passed for c in check_f1_conditions(params, r1, r2, fail_fast=False)}
    assert res == _direct_conditions(params, r1, r2)


def test_gen_f1_structure_and_reproducibility():
    params = F1Params(Fraction(1, 10), 200)
    a = gen_f1(params, seed=5, max_retries=2)
    b = gen_f1(params, seed=5, max_retries=2)
    assert np.array_equal(a.v1.matrix, b.v1.matrix) and np.array_equal(a.v2.matrix, b.v2.matrix)
    assert a.v1.t == a.v2.t == params.t + 1
    assert a.v1.matrix[0, :100].all() and not a.v1.matrix[0, 100:].any()
    assert (a.v1.matrix[0] ^ a.v2.matrix[0]).all()
    # the planted pair alone reaches every item
    assert sw_star_xos_pair(a.v1, a.v2).value == 200
    # start_attempt replays a specific attempt
    c = gen_f1(params, seed=5, max_retries=1, start_attempt=a.attempt)
    assert np.array_equal(a.v1.matrix, c.v1.matrix)


def test_small_f1_is_flagged_and_declined():
    inst = gen_f1(F1Params(Fraction(1, 10), 200), seed=0, max_retries=3)
    assert not inst.verified and inst.failed
    rep = verify_f1_exclusion(inst, 2, Fraction(1, 2))
    assert not rep.passed and "unverified" in rep.reason
    prov = f1_to_instance(inst).provenance
    assert prov["verified"] is False and prov["failed_conditions"] == inst.failed


# -- appendix G ------------------------------------------------------------------------------


def test_g_rejects_bad_m():
    with pytest.raises(DimensionError):
        gen_appendix_g(100, 8, seed=0)
    with pytest.raises(ValueError):
        gen_appendix_g(12, 1, seed=0)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([6, 12, 36, 108]), st.integers(2, 16), st.integers(0, 2**32 - 1))
def test_g_structure(m, l, seed):
    g = gen_appendix_g(m, l, seed)
    S, T = g.S, g.T
    assert S.sum() == T.sum() == m // 2 and (S & T).sum() == m // 3
    for mat, inside, J in ((g.v1.matrix, S, g.J1), (g.v2.matrix, T, g.J2)):
        others = np.delete(mat, J, axis=0)
        assert ((others & inside).sum(axis=1) == m // 3).all()
        assert ((others & ~inside).sum(axis=1) == m // 6).all()
    assert g.U1.sum() == m // 2
    if g.M == 1:
        assert (g.U1 ^ g.U2).all()
        assert sw_star_xos_pair(g.v1, g.v2).value == m
    else:
        assert np.array_equal(g.U1, g.U2)
        assert pair_welfare_matrix(g.v1, g.v2)[g.J1, g.J2] == m // 2
        assert (S & T <= g.U1).all()


def test_g_forced_bits():
    assert sw_star_xos_pair(*g_to_instance(gen_appendix_g(108, 64, seed=2, force_M=1)).players).value == 108
    g = gen_appendix_g(108, 64, seed=2, force_M=0)
    assert pair_welfare_matrix(g.v1, g.v2)[g.J1, g.J2] == 54
    assert "hidden" not in g_to_instance(g).provenance
    assert g_to_instance(g, reveal=True).provenance["hidden"]["M"] == 0


def _enumerated_moments(m, case):
    """Mean and variance of |A u B| by listing every equally likely configuration."""
    # WLOG fix S, T; cells ST, S-, -T, --
    ST = list(range(0, m // 3))
    S_ = list(range(m // 3, m // 2))
    _T = list(range(m // 2, 2 * m // 3))
    NN = list(range(2 * m // 3, m))
    S, T = set(ST + S_), set(ST + _T)
    notS, notT = sorted(set(range(m)) - S), sorted(set(range(m)) - T)

    def law(inside, outside):
        return [set(a) | set(b) for a in itertools.combinations(sorted(inside), m // 3)
                for b in itertools.combinations(outside, m // 6)]

    Bs = law(T, notT)
    As = law(S, notS) if case == "neither" else [set(ST) | set(c) for c in itertools.combinations(NN, m // 6)]
    vals = [len(a | b) for a in As for b in Bs]
    n = len(vals)
    mean = Fraction(sum(vals), n)
    var = Fraction(sum(v * v for v in vals), n) - mean * mean
    return mean, var


@pytest.mark.parametrize("m", [6, 12])
@pytest.mark.parametrize("case", ["one", "neither"])
def test_pair_moments_match_enumeration(m, case):
    assert appendix_g_pair_moments(m, case) == _enumerated_moments(m, case)


def test_pair_moment_means():
    m = 108
    assert appendix_g_pair_moments(m, "one")[0] == Fraction(13 * m, 18)
    assert appendix_g_pair_moments(m, "neither")[0] == Fraction(20 * m, 27)


def test_small_g_stats():
    st_ = stats_appendix_g(m=36, l=8, trials=400, seed=1)
    assert st_.m0_trials + st_.m1_trials == 400
    assert st_.both_planted_exact
    assert st_.frac_full_m1 == 1.0
    assert st_.one_planted.draws == st_.m0_trials
    assert math.isfinite(st_.one_planted.z)
