"""Posted-price sequential mechanism: reporting your sketch is the best response.

Each bidder in turn names k item sets; the auctioneer grants one at random
and charges, per granted item, how many of the k sets named it divided by
2k.  The script lists every possible report for one small valuation, shows
that the expected-utility maximisers are exactly the (k, 1/2)-sketches, and
then runs the mechanism on a three-bidder instance.

    python3 demos/truthful_mechanism.py
"""

import itertools

from xosketch import Report, SketchParams, Valuation, best_response, expected_utility, run_mechanism, sketch_exact
from xosketch.mechanism import mechanism_expected_welfare


def enumerate_reports(v, k):
    subsets = [set(s) for r in range(v.m + 1) for s in itertools.combinations(range(v.m), r)]
    scored = []
    for combo in itertools.combinations_with_replacement(range(len(subsets)), k):
        rep = Report.from_sets(v.m, [subsets[c] for c in combo])
        scored.append((expected_utility(v, rep), rep))
    return sorted(scored, key=lambda x: x[0], reverse=True)


def main():
    v = Valuation.from_sets(3, [{0, 1}, {2}])
    k = 2
    print("true clauses:", [sorted(c.support.indices) for c in v.clauses], f"k={k}")
    scored = enumerate_reports(v, k)
    print(f"{len(scored)} possible reports; the top five by expected utility:")
    for u, rep in scored[:5]:
        print(f"  {str(u):>6}  {list(map(list, rep.key()))}")
    sk = sketch_exact(v, SketchParams(k))
    print("sketch objective:", sk.objective, "for", [sorted(c.support.indices) for c in sk.clauses.clauses])
    br = best_response(v, k)
    print(f"best responses are sketches: {br.all_sketches}; best non-sketch utility {br.best_other} < {br.utility}")

    print("\nthree bidders, truthful play, k=4")
    vals = [
        Valuation.from_sets(6, [{0, 1, 2}, {3, 4}]),
        Valuation.from_sets(6, [{2, 3}, {4, 5}, {0}]),
        Valuation.from_sets(6, [range(6)]),
    ]
    for seed in range(3):
        out = run_mechanism(vals, 4, seed=seed)
        print(f"  seed {seed}: owners {out.allocation.owner.tolist()}, payments {[str(p) for p in out.payments]}, "
              f"utilities {[str(u) for u in out.utilities]}")
    print("  exact expected welfare:", mechanism_expected_welfare(vals, 4))


if __name__ == "__main__":
    main()
