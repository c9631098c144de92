"""One instance through every protocol, then worst-case ratios over a battery.

Alice and Bob each hold an XOS valuation over the same items and may send
one round of messages.  Each protocol is run with its expected welfare
computed exactly over its coin, and compared with the optimum and with the
factor it is proven to reach.

    python3 demos/protocol_tour.py [--count 300] [--seed 0]
"""

import argparse
from fractions import Fraction

from xosketch import (
    Valuation,
    baseline_grand_bundle,
    run_protocol1,
    run_protocol2,
    run_protocol3,
    run_protocol5,
    run_protocol6,
    sw_star_xos_pair,
)
from xosketch.harness import RunConfig, run_battery, summarize


def tour():
    v1 = Valuation.from_sets(6, [{0, 1, 2}, {3, 4}, {0, 5}])
    v2 = Valuation.from_sets(6, [{2, 3, 4}, {0, 1}, {5}])
    opt = sw_star_xos_pair(v1, v2)
    print(f"optimum {opt.value} via clause pair {opt.witnesses}, split {opt.allocation.owner.tolist()}")
    runs = [
        ("baseline", baseline_grand_bundle([v1, v2])),
        ("P1", run_protocol1(v1, v2)),
        ("P2", run_protocol2(v1, v2)),
        ("P3 k=4", run_protocol3(v1, v2, 4)),
        ("P5 k=8", run_protocol5(v1, v2, 8)),
        ("P6 k=8", run_protocol6(v1, v2, 8)),
    ]
    print(f"{'protocol':<9} {'E[welfare]':>10} {'ratio':>7} {'bound':>7} {'bits':>5} rounds")
    for name, out in runs:
        ratio = Fraction(out.expected_welfare) / opt.value
        print(f"{name:<9} {str(out.expected_welfare):>10} {float(ratio):7.3f} {float(out.guarantee):7.3f} "
              f"{out.transcript.total_bits:>5} {out.transcript.round_count}")


def battery(count, seed):
    spec = f"random:bxos:m=4-10,t=2-8,count={count}"
    rows = []
    for protocol, ks in (("baseline", [None]), ("1", [None]), ("2", [None]), ("3", [2, 4, 8, 16]), ("6", [2, 4, 8, 16])):
        for k in ks:
            rows += run_battery(RunConfig(protocol, k=k), spec, seed)
    print(f"\n{count} random BXOS pairs, seed {seed}")
    print(f"{'protocol':<9} {'k':>3} {'min ratio':>10} {'mean':>7} violations")
    for s in summarize(rows):
        k = "" if s["k"] is None else s["k"]
        print(f"{s['protocol']:<9} {k:>3} {float(Fraction(s['min_ratio'])):10.4f} {float(s['mean_ratio']):7.4f} {s['violations']}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    tour()
    battery(args.count, args.seed)


if __name__ == "__main__":
    main()
