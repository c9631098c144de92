"""``xosketch`` command line: run, gen, sweep, oracle, verify.

Exit status is 1 whenever any row violates its proven bound (or a verifier
fails), 2 on usage errors, 0 otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import harness
from .hardness import L_NOTE, F1Params, f1_to_instance, g_to_instance, gen_appendix_g, gen_f1, stats_appendix_g, verify_f1_exclusion
from .mechanism import best_response
from .sketch import (
    SketchParams,
    compute_sketch,
    sketch_local_search,
    verify_exchange_lemma_binary,
    verify_exchange_lemma_general,
)
from .valuations import Instance, Valuation, dump_instance


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


# -- run ----------------------------------------------------------------------------------


def cmd_run(args) -> int:
    protocol = "mechanism" if args.mechanism else args.protocol
    if protocol is None:
        raise SystemExit("run: give --protocol or --mechanism")
    spec = args.instances
    if spec is None:
        kind = "random:bxos"
        spec = f"{kind}:m={args.m},n={args.n},count={args.count}"
    if args.oracle_only:
        rows = harness.run_battery(None, spec, args.seed, oracle_only=True)
        _write(harness.rows_to_csv(rows), args.out)
        return 0
    cfg = harness.RunConfig(
        protocol=str(protocol),
        k=args.k,
        mode=args.mode,
        X=Fraction(args.X) if args.X is not None else None,
        alpha=Fraction(args.alpha) if args.alpha is not None else None,
        value_bits=args.value_bits,
        max_candidates=args.max_candidates,
        timing=args.timing,
    )
    rows = harness.run_battery(cfg, spec, args.seed)
    _write(harness.rows_to_csv(rows, harness.columns_for(cfg)), args.out)
    bad = harness.violations(rows)
    if bad:
        print(f"{bad} bound violation(s)", file=sys.stderr)
    return 1 if bad else 0


# -- gen ------------------------------------------------------------------------------------


def cmd_gen(args) -> int:
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    def emit(inst: Instance, name: str):
        text = dump_instance(inst)
        if out_dir is None:
            sys.stdout.write(text)
        else:
            (out_dir / name).write_text(text)

    if args.family == "f1":
        f1 = gen_f1(F1Params(Fraction(args.eps), args.m), args.seed, max_retries=args.retries)
        emit(f1_to_instance(f1), f"f1-m{args.m}-s{args.seed}.json")
        status = "verified" if f1.verified else "UNVERIFIED (failed: " + ",".join(f1.failed) + ")"
        print(f"f1 m={args.m} attempt={f1.attempt} {status}", file=sys.stderr)
        return 0
    if args.family == "appendix-g":
        g = gen_appendix_g(args.m, args.l, args.seed, args.force_m)
        emit(g_to_instance(g, reveal=args.reveal), f"g-m{args.m}-s{args.seed}.json")
        return 0
    kind = "random:xos" if args.kind == "xos" else "random:bxos"
    spec = f"{kind}:m={args.m},t={args.t},n={args.n},count={args.count}"
    for idx, inst in harness.iter_instances(spec, args.seed):
        emit(inst, f"{args.kind}-{idx:05d}.json")
    return 0


# -- sweep ------------------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    rows = []
    ks = _int_list(args.k) if args.k else [None]
    for protocol in args.protocol.split(","):
        for k in ks:
            cfg = harness.RunConfig(protocol=protocol, k=k, max_candidates=args.max_candidates)
            rows += harness.run_battery(cfg, args.instances, args.seed)
    cols = harness.BASE_COLUMNS
    _write(harness.rows_to_csv(rows, cols), args.out)
    summary = harness.summarize(rows)
    text = harness.summary_json(summary)
    if args.summary:
        Path(args.summary).write_text(text)
    else:
        sys.stderr.write(text)
    return 1 if harness.violations(rows) else 0


# -- oracle -------------------------------------------------------------------------------------


def cmd_oracle(args) -> int:
    rows = harness.run_battery(None, args.instances, args.seed, oracle_only=True)
    _write(harness.rows_to_csv(rows), args.out)
    return 0


# -- verify ---------------------------------------------------------------------------------------


def _verify_lemma(args) -> int:
    params = SketchParams(args.k, Fraction(args.alpha))
    rows = []
    for idx, inst in harness.iter_instances(args.instances, args.seed):
        for p, v in enumerate(inst.players):
            for method in ("compute", "local"):
                sk = compute_sketch(v, params) if method == "compute" else sketch_local_search(v, params)
                reps = [("general", verify_exchange_lemma_general(sk, v, params))]
                if v.is_binary:
                    reps.append(("binary", verify_exchange_lemma_binary(sk, v, params)))
                for form, rep in reps:
                    rows.append({
                        "instance": f"{idx:05d}", "player": p, "method": sk.method, "form": form,
                        "passed": rep.passed, "worst_slack": rep.worst_slack, "worst_clause": rep.worst_clause,
                    })
    _write(harness.rows_to_csv(rows), args.out)
    return 0 if all(r["passed"] for r in rows) else 1


def _verify_f1(args) -> int:
    inst = gen_f1(F1Params(Fraction(args.eps), args.m), args.seed, max_retries=args.retries, start_attempt=args.attempt)
    rows = []
    for alpha in args.alpha.split(","):
        for k in _int_list(args.k):
            rep = verify_f1_exclusion(inst, k, Fraction(alpha))
            rows.append({
                "m": args.m, "k": k, "alpha": Fraction(alpha), "passed": rep.passed,
                "sketch1": " ".join(map(str, rep.sides[0].sketch)) if rep.sides else "",
                "sketch2": " ".join(map(str, rep.sides[1].sketch)) if rep.sides else "",
                "best_pair": rep.best_pair, "best_pair_bound": rep.best_pair_bound,
                "sw_star": rep.sw_star, "reason": rep.reason,
            })
    _write(harness.rows_to_csv(rows), args.out)
    return 0 if all(r["passed"] for r in rows) else 1


def _verify_mechanism(args) -> int:
    import itertools

    rows = []
    subsets = list(itertools.product((False, True), repeat=args.m))
    for t in range(1, args.t + 1):
        for clauses in itertools.combinations_with_replacement(subsets, t):
            v = Valuation(np.array(clauses, dtype=bool))
            br = best_response(v, args.k)
            rows.append({
                "clauses": "|".join("".join("1" if x else "0" for x in c) for c in clauses),
                "k": args.k, "utility": br.utility, "sketch_objective": br.sketch_objective,
                "best_other": br.best_other, "all_sketches": br.all_sketches, "strict": br.strict,
                "certified": br.certified,
            })
    _write(harness.rows_to_csv(rows), args.out)
    return 0 if all(r["certified"] for r in rows) else 1


def _verify_g(args) -> int:
    st = stats_appendix_g(args.m, args.l, args.trials, seed=args.seed)
    report = {
        "m": st.m, "l": st.l, "trials": st.trials, "m0_trials": st.m0_trials, "m1_trials": st.m1_trials,
        "both_planted_exact": st.both_planted_exact,
        "one_planted": {"draws": st.one_planted.draws, "mean": st.one_planted.mean,
                        "expected": str(st.one_planted.exact_mean), "z": st.one_planted.z},
        "neither_planted": {"draws": st.neither_planted.draws, "mean": st.neither_planted.mean,
                            "expected": str(st.neither_planted.exact_mean), "z": st.neither_planted.z},
        "frac_above_alpha_m0": st.frac_above_alpha_m0,
        "frac_full_m1": st.frac_full_m1,
        "note": L_NOTE,
    }
    _write(json.dumps(report, sort_keys=True, indent=2) + "\n", args.out)
    ok = (st.both_planted_exact and st.one_planted.within_3sigma
          and st.neither_planted.within_3sigma and st.frac_full_m1 == 1.0)
    return 0 if ok else 1


_VERIFY_M = {"mechanism": 3, "appendix-g": 108}


def cmd_verify(args) -> int:
    if args.seed is None and args.what != "mechanism":
        raise ValueError(f"verify {args.what} needs --seed")
    if args.m is None:
        if args.what == "f1":
            raise ValueError("verify f1 needs --m")
        args.m = _VERIFY_M.get(args.what)
    return {"lemma": _verify_lemma, "f1": _verify_f1, "mechanism": _verify_mechanism, "appendix-g": _verify_g}[args.what](args)


# -- parser ------------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xosketch", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a protocol or the mechanism over a battery")
    run.add_argument("--protocol", choices=["1", "2", "3", "4", "5", "6", "baseline"])
    run.add_argument("--mechanism", action="store_true")
    run.add_argument("--k", type=int)
    run.add_argument("--mode", choices=["alloc", "decision"], default="alloc")
    run.add_argument("--X", help="decision threshold (rational)")
    run.add_argument("--alpha", help="decision factor; defaults to the protocol's guarantee")
    run.add_argument("--instances", help="instance spec or path")
    run.add_argument("--n", type=int, default=2, help="players, when --instances is omitted")
    run.add_argument("--m", default="6", help="items, when --instances is omitted")
    run.add_argument("--count", type=int, default=100)
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--value-bits", type=int, default=32)
    run.add_argument("--max-candidates", type=int, default=2_000_000)
    run.add_argument("--oracle-only", action="store_true")
    run.add_argument("--timing", action="store_true", help="add a wall_time column (breaks byte-identical reruns)")
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="write instance JSON files")
    gen.add_argument("family", choices=["random", "f1", "appendix-g"])
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--t", default="2-8")
    gen.add_argument("--n", type=int, default=2)
    gen.add_argument("--kind", choices=["bxos", "xos"], default="bxos")
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--eps", default="1/10")
    gen.add_argument("--retries", type=int, default=1000)
    gen.add_argument("--l", type=int, default=64)
    gen.add_argument("--force-m", type=int, choices=[0, 1])
    gen.add_argument("--reveal", action="store_true", help="include the hidden construction fields")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", help="output directory (default: stdout)")
    gen.set_defaults(func=cmd_gen)

    sw = sub.add_parser("sweep", help="ratio-vs-k curves with a summary")
    sw.add_argument("--protocol", required=True, help="comma-separated protocol ids")
    sw.add_argument("--k", help="comma-separated k values")
    sw.add_argument("--instances", required=True)
    sw.add_argument("--seed", type=int, required=True)
    sw.add_argument("--max-candidates", type=int, default=2_000_000)
    sw.add_argument("--out")
    sw.add_argument("--summary")
    sw.set_defaults(func=cmd_sweep)

    orc = sub.add_parser("oracle", help="exact SW* for every instance")
    orc.add_argument("--instances", required=True)
    orc.add_argument("--seed", type=int, required=True)
    orc.add_argument("--out")
    orc.set_defaults(func=cmd_oracle)

    ver = sub.add_parser("verify", help="lemma, construction and truthfulness verifiers")
    ver.add_argument("what", choices=["lemma", "f1", "mechanism", "appendix-g"])
    ver.add_argument("--instances", default="random:bxos:m=2-10,t=1-8,count=50")
    ver.add_argument("--k", default="2")
    ver.add_argument("--alpha", default="1/2")
    ver.add_argument("--eps", default="1/10")
    ver.add_argument("--m", type=int, help="items (default: 3 for mechanism, 108 for appendix-g; required for f1)")
    ver.add_argument("--t", type=int, default=3)
    ver.add_argument("--l", type=int, default=64)
    ver.add_argument("--trials", type=int, default=21000)
    ver.add_argument("--retries", type=int, default=1000)
    ver.add_argument("--attempt", type=int, default=0, help="first f1 sampling attempt")
    ver.add_argument("--seed", type=int, help="required except for the exhaustive mechanism check")
    ver.add_argument("--out")
    ver.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify" and args.what in ("lemma", "mechanism"):
            args.k = int(args.k)
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"xosketch: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
