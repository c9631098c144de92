"""Search for the smallest m at which the planted-clause instance verifies.

Walks m downward on a fixed grid, giving each size up to 1000 sampling
attempts.  The search stops at the first size where no attempt satisfies all
seven concentration conditions; the previous size is the answer.  Expect tens
of minutes: each failed size costs a full retry budget.

    python3 demos/f1_smallest_m.py --start 52000 --step 400 --seed 0
"""

import argparse
import time

from xosketch.hardness import F1Params, gen_f1


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", default="0.1")
    ap.add_argument("--start", type=int, default=52000)
    ap.add_argument("--step", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--retries", type=int, default=1000)
    args = ap.parse_args()

    found = None
    m = args.start
    while m > 0:
        t0 = time.time()
        inst = gen_f1(F1Params(args.eps, m), seed=args.seed, max_retries=args.retries)
        dt = time.time() - t0
        status = "verified" if inst.verified else "failed " + ",".join(inst.failed)
        print(f"m={m} attempt={inst.attempt} {status} ({dt:.0f}s)", flush=True)
        if not inst.verified:
            break
        found = (m, inst.attempt)
        m -= args.step
    if found:
        print(f"smallest verified m on this grid: {found[0]} (seed {args.seed}, attempt {found[1]})")


if __name__ == "__main__":
    main()
