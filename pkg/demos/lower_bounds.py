"""The two adversarial families, measured.

Hidden-bit family: two random set systems with one planted pair each.  When
the hidden bit is 1 the planted pair covers every item; when it is 0 it
covers only half of them, and every other pair looks statistically the same
either way.  The script samples instances and compares the pair welfare of
each case with its exact expectation.

Planted-clause family: the optimum comes from a pair of half-size clauses
that no sketch ever reports, so any protocol that only sees sketches is
stuck near 23/32 of optimum.  Sampling a verified instance takes m in the
tens of thousands; pass --f1-m to try one (slow), otherwise a small
unverified instance shows how the generator reports failed conditions.

    python3 demos/lower_bounds.py [--trials 3000] [--f1-m 45600 --f1-attempt 138]
"""

import argparse
import time
from fractions import Fraction

from xosketch import F1Params, gen_f1, stats_appendix_g, verify_f1_exclusion
from xosketch.hardness import appendix_g_pair_moments


def hidden_bit(trials, seed):
    m = 108
    st = stats_appendix_g(m=m, l=64, trials=trials, seed=seed)
    print(f"hidden-bit family, m={m}, l=64, {trials} instances ({st.m0_trials} with bit 0)")
    print(f"  bit 1: fraction with optimum = m ............ {st.frac_full_m1}")
    print(f"  bit 0, planted pair always m/2 .............. {st.both_planted_exact}")
    for label, cs, case in (("one planted", st.one_planted, "one"), ("neither planted", st.neither_planted, "neither")):
        mu, var = appendix_g_pair_moments(m, case)
        print(f"  bit 0, {label:<15}: mean {cs.mean:8.3f}  exact {str(mu):>4}  "
              f"sd {float(var) ** 0.5:.3f}  z {cs.z:+.2f}")
    print(f"  bit 0, optimum above {st.alpha:.4f} m ......... {st.frac_above_alpha_m0:.3f}")


def planted(m, attempt, retries):
    eps = Fraction(1, 10)
    t0 = time.time()
    inst = gen_f1(F1Params(eps, m), seed=0, max_retries=retries, start_attempt=attempt)
    print(f"\nplanted-clause family, eps={eps}, m={m}, t={inst.params.t} ({time.time() - t0:.0f}s to sample)")
    if not inst.verified:
        print(f"  attempt {inst.attempt} unverified; failing conditions: {inst.failed}")
        for c in inst.conditions:
            print(f"    {c.name}: observed {c.observed}, allowed {c.bounds}, {'ok' if c.passed else 'FAIL'}")
        return
    for k in (1, 2, 4, 8):
        rep = verify_f1_exclusion(inst, k, Fraction(1, 3))
        print(f"  k={k}: planted clause excluded {all(s.excludes_planted for s in rep.sides)}, best reported pair "
              f"{rep.best_pair} ({rep.best_pair / m:.3f} m) vs optimum {rep.sw_star}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--f1-m", type=int, default=400)
    ap.add_argument("--f1-attempt", type=int, default=0)
    ap.add_argument("--f1-retries", type=int, default=3)
    args = ap.parse_args()
    hidden_bit(args.trials, args.seed)
    planted(args.f1_m, args.f1_attempt, args.f1_retries)


if __name__ == "__main__":
    main()
