"""Instance batteries, per-instance result rows and CSV/JSON reporting.

Instance specs are strings:

    random:bxos:m=8,t=6,count=200          binary clauses, sizes uniform in [m/4, 3m/4]
    random:xos:m=2-8,t=1-6,vmax=3,count=200  integer clause values in 0..vmax
    appendix-g:m=108,l=64,count=10,force_m=1
    f1:eps=0.1,m=400,count=1,retries=50
    path/to/instance.json  or a directory of *.json

``a-b`` draws an integer uniformly per instance.  Instance ``i`` of a spec
run with seed ``s`` uses ``SeedSequence([s, i])``, so rows do not depend on
how the battery is split across workers.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import BudgetExceededError
from .hardness import F1Params, f1_to_instance, g_to_instance, gen_appendix_g, gen_f1
from .mechanism import mechanism_expected_welfare, run_mechanism
from .protocols import (
    DecisionSpec,
    baseline_grand_bundle,
    guarantee,
    run_protocol1,
    run_protocol2,
    run_protocol3,
    run_protocol4,
    run_protocol5,
    run_protocol6,
)
from .valuations import Instance, Valuation, _scalar, load_instance
from .welfare import sw_star_n, sw_star_xos_pair

__all__ = [
    "InstanceSpec",
    "parse_instance_spec",
    "iter_instances",
    "random_bxos",
    "random_xos",
    "RunConfig",
    "run_one",
    "run_battery",
    "oracle_row",
    "rows_to_csv",
    "summarize",
    "decision_grid",
    "FLOAT_RTOL",
    "PROTOCOLS",
    "thread_count",
]

FLOAT_RTOL = 1e-9
PROTOCOLS = ("1", "2", "3", "4", "5", "6", "baseline", "mechanism")
THREADS_ENV = "XOSKETCH_THREADS"

_SPEC_KEYS = {
    "random:bxos": {"m", "t", "n", "count"},
    "random:xos": {"m", "t", "n", "count", "vmax"},
    "appendix-g": {"m", "l", "count", "force_m"},
    "f1": {"eps", "m", "count", "retries"},
}


@dataclass(frozen=True)
class InstanceSpec:
    kind: str
    params: dict
    text: str

    @property
    def count(self) -> int:
        if self.kind == "file":
            return len(self.params["paths"])
        return int(self.params.get("count", 1))


def _parse_value(key: str, raw: str):
    if key == "eps":
        return Fraction(raw)
    if "-" in raw:
        lo, hi = raw.split("-", 1)
        lo, hi = int(lo), int(hi)
        if lo > hi:
            raise ValueError(f"empty range {raw!r} for {key}")
        return (lo, hi)
    return int(raw)


def parse_instance_spec(text: str) -> InstanceSpec:
    for kind, allowed in _SPEC_KEYS.items():
        if text == kind or text.startswith(kind + ":"):
            body = text[len(kind) + 1 :]
            params = {}
            for item in filter(None, body.split(",")):
                if "=" not in item:
                    raise ValueError(f"malformed spec item {item!r} (expected key=value)")
                key, raw = item.split("=", 1)
                if key not in allowed:
                    raise ValueError(f"unknown key {key!r} for {kind}; allowed: {sorted(allowed)}")
                params[key] = _parse_value(key, raw)
            if kind.startswith("random") and "m" not in params:
                raise ValueError(f"{kind} needs m")
            return InstanceSpec(kind, params, text)
    path = Path(text)
    if path.is_dir():
        paths = sorted(str(p) for p in path.glob("*.json"))
        if not paths:
            raise ValueError(f"no *.json instances in {text}")
        return InstanceSpec("file", {"paths": paths}, text)
    if path.is_file():
        return InstanceSpec("file", {"paths": [str(path)]}, text)
    raise ValueError(f"not an instance spec or existing path: {text!r}")


def _draw(rng, value, default):
    value = default if value is None else value
    if isinstance(value, tuple):
        return int(rng.integers(value[0], value[1] + 1))
    return int(value)


def random_bxos(m: int, t: int, rng) -> Valuation:
    """``t`` clauses, each uniform over sets whose size is uniform in [m/4, 3m/4]."""
    lo = -(-m // 4)
    hi = max(lo, (3 * m) // 4)
    mat = np.zeros((t, m), dtype=bool)
    for j in range(t):
        size = int(rng.integers(lo, hi + 1))
        mat[j, rng.permutation(m)[:size]] = True
    return Valuation(mat)


def random_xos(m: int, t: int, rng, vmax: int = 3) -> Valuation:
    return Valuation(rng.integers(0, vmax + 1, size=(t, m)).astype(np.int64))


def instance_seed(seed: int, idx: int) -> int:
    return int(np.random.SeedSequence([seed, idx]).generate_state(1)[0])


def make_instance(spec: InstanceSpec, seed: int, idx: int) -> Instance:
    p = spec.params
    if spec.kind == "file":
        return load_instance(p["paths"][idx])
    rng = np.random.default_rng(np.random.SeedSequence([seed, idx]))
    if spec.kind.startswith("random"):
        m = _draw(rng, p.get("m"), None)
        n = _draw(rng, p.get("n"), 2)
        players = []
        for _ in range(n):
            t = _draw(rng, p.get("t"), (2, 8))
            if spec.kind == "random:bxos":
                players.append(random_bxos(m, t, rng))
            else:
                players.append(random_xos(m, t, rng, _draw(rng, p.get("vmax"), 3)))
        return Instance(tuple(players), {"construction": spec.kind, "seed": seed, "index": idx})
    if spec.kind == "appendix-g":
        g = gen_appendix_g(_draw(rng, p.get("m"), 108), _draw(rng, p.get("l"), 64), rng, p.get("force_m"))
        inst = g_to_instance(g)
        inst.provenance.update({"seed": seed, "index": idx})
        return inst
    if spec.kind == "f1":
        params = F1Params(p.get("eps", Fraction(1, 10)), _draw(rng, p.get("m"), 400))
        f1 = gen_f1(params, instance_seed(seed, idx), max_retries=_draw(rng, p.get("retries"), 1000))
        return f1_to_instance(f1)
    raise ValueError(f"unknown instance kind {spec.kind}")


def iter_instances(spec: InstanceSpec | str, seed: int) -> Iterator[tuple[int, Instance]]:
    if isinstance(spec, str):
        spec = parse_instance_spec(spec)
    for idx in range(spec.count):
        yield idx, make_instance(spec, seed, idx)


# -- running ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    protocol: str
    k: int | None = None
    mode: str = "alloc"
    X: Fraction | None = None
    alpha: Fraction | None = None
    value_bits: int = 32
    max_candidates: int = 2_000_000
    timing: bool = False

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if self.protocol in ("3", "4", "5", "6", "mechanism") and self.k is None:
            raise ValueError(f"protocol {self.protocol} needs k")
        if self.mode == "decision":
            if self.protocol not in ("2", "5", "6"):
                raise ValueError("decision mode is available for protocols 2, 5 and 6")
            if self.X is None:
                raise ValueError("decision mode needs X")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    x = _scalar(x)
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _exact(*xs) -> bool:
    return all(isinstance(_scalar(x), (int, Fraction)) for x in xs)


def _meets(achieved, factor, oracle) -> bool:
    if _exact(achieved, oracle):
        return Fraction(achieved) >= factor * Fraction(oracle)
    return float(achieved) >= float(factor) * float(oracle) - FLOAT_RTOL * abs(float(oracle))


def _ratio(achieved, oracle):
    if oracle == 0:
        return Fraction(1) if achieved == 0 else None
    if _exact(achieved, oracle):
        return Fraction(achieved) / Fraction(oracle)
    return float(achieved) / float(oracle)


def _oracle(vals) -> object:
    if len(vals) == 2:
        return sw_star_xos_pair(*vals).value
    return sw_star_n(vals).value


BASE_COLUMNS = [
    "instance", "seed", "protocol", "k", "n", "m", "oracle", "achieved", "ratio",
    "bound", "bound_satisfied", "bits", "rounds", "sketch", "status",
]
DECISION_COLUMNS = ["X", "alpha", "answer", "decision_ok"]
MECHANISM_COLUMNS = ["payments", "utilities", "min_utility"]


def run_one(cfg: RunConfig, inst: Instance, instance_id: str, seed: int) -> dict:
    """Run one protocol on one instance and return a result row (values unformatted)."""
    vals = list(inst.players)
    row = {
        "instance": instance_id, "seed": seed, "protocol": cfg.protocol, "k": cfg.k,
        "n": len(vals), "m": inst.m, "status": "ok",
    }
    start = time.perf_counter()
    try:
        oracle = _oracle(vals)
        row["oracle"] = oracle
        pid = cfg.protocol
        if pid != "4" and pid != "mechanism" and len(vals) != 2:
            raise ValueError(f"protocol {pid} is two-player; instance has {len(vals)} players")
        spec = DecisionSpec(cfg.X, cfg.alpha) if cfg.mode == "decision" else None
        sketch_args = {"max_candidates": cfg.max_candidates}
        if pid == "1":
            out = run_protocol1(*vals, seed=seed)
        elif pid == "2":
            out = run_protocol2(*vals, mode=cfg.mode, spec=spec, value_bits=cfg.value_bits)
        elif pid == "3":
            out = run_protocol3(*vals, cfg.k, seed=seed, **sketch_args)
        elif pid == "4":
            out = run_protocol4(vals, cfg.k, seed=seed, **sketch_args)
        elif pid == "5":
            out = run_protocol5(*vals, cfg.k, mode=cfg.mode, spec=spec, value_bits=cfg.value_bits, **sketch_args)
        elif pid == "6":
            out = run_protocol6(*vals, cfg.k, mode=cfg.mode, spec=spec, value_bits=cfg.value_bits, **sketch_args)
        elif pid == "baseline":
            out = baseline_grand_bundle(vals, seed=seed)
        else:
            out = None

        if pid == "mechanism":
            factor = guarantee("p4", cfg.k)
            achieved = mechanism_expected_welfare(vals, cfg.k)
            res = run_mechanism(vals, cfg.k, seed=seed)
            row.update(
                payments=";".join(_fmt(p) for p in res.payments),
                utilities=";".join(_fmt(u) for u in res.utilities),
                min_utility=min(res.utilities),
                bits=inst.m * (len(vals) - 1),
                rounds=len(vals) - 1,
                sketch="",
            )
            ok = _meets(achieved, factor, oracle) and min(res.utilities) >= 0
        elif cfg.mode == "decision":
            factor = out.guarantee
            alpha = cfg.alpha if cfg.alpha is not None else factor
            answer = out.answer
            if oracle >= cfg.X:
                decision_ok = answer
            elif oracle < alpha * cfg.X:
                decision_ok = not answer
            else:
                decision_ok = True
            achieved = None
            row.update(X=cfg.X, alpha=alpha, answer="yes" if answer else "no", decision_ok=decision_ok)
            ok = decision_ok
        else:
            factor = out.guarantee
            achieved = out.expected_welfare
            ok = _meets(achieved, factor, oracle)
        if out is not None:
            row.update(
                bits=out.transcript.total_bits,
                rounds=out.transcript.round_count,
                sketch=str(out.transcript.metadata.get("sketch", "")),
            )
        row.update(
            achieved=achieved,
            ratio=_ratio(achieved, oracle) if achieved is not None else None,
            bound=factor,
            bound_satisfied=ok,
        )
    except BudgetExceededError as exc:
        row["status"] = f"budget_exceeded: {exc}"
    if cfg.timing:
        row["wall_time"] = round(time.perf_counter() - start, 6)
    return row


def oracle_row(inst: Instance, instance_id: str, seed: int) -> dict:
    vals = list(inst.players)
    res = sw_star_xos_pair(*vals) if len(vals) == 2 else sw_star_n(vals)
    return {
        "instance": instance_id, "seed": seed, "n": len(vals), "m": inst.m,
        "oracle": res.value, "witnesses": ";".join(str(w) for w in res.witnesses),
        "owner": "".join(str(o) for o in res.allocation.owner),
    }


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _job(args):
    cfg, spec_text, seed, idx, oracle_only = args
    spec = parse_instance_spec(spec_text)
    inst = make_instance(spec, seed, idx)
    iid = f"{idx:05d}"
    iseed = instance_seed(seed, idx)
    if oracle_only:
        return oracle_row(inst, iid, iseed)
    return run_one(cfg, inst, iid, iseed)


def run_battery(cfg: RunConfig | None, spec: str, seed: int, oracle_only: bool = False, threads: int | None = None) -> list[dict]:
    """Rows for every instance of ``spec``, in instance order regardless of worker count."""
    parsed = parse_instance_spec(spec)
    jobs = [(cfg, spec, seed, idx, oracle_only) for idx in range(parsed.count)]
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


def rows_to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def columns_for(cfg: RunConfig) -> list[str]:
    cols = list(BASE_COLUMNS)
    if cfg.mode == "decision":
        cols += DECISION_COLUMNS
    if cfg.protocol == "mechanism":
        cols += MECHANISM_COLUMNS
    if cfg.timing:
        cols.append("wall_time")
    return cols


def violations(rows: list[dict]) -> int:
    return sum(1 for r in rows if r.get("bound_satisfied") is False)


def summarize(rows: list[dict], key: str = "k") -> list[dict]:
    """Per parameter point: count, min and mean ratio, violations."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["protocol"], r.get(key)), []).append(r)
    out = []
    for (protocol, value), grp in sorted(groups.items(), key=lambda kv: (str(kv[0][0]), kv[0][1] or 0)):
        ratios = [r["ratio"] for r in grp if r.get("ratio") is not None]
        out.append({
            "protocol": protocol,
            key: value,
            "count": len(grp),
            "min_ratio": _fmt(min(ratios)) if ratios else "",
            "mean_ratio": format(float(sum(Fraction(x) if _exact(x) else x for x in ratios)) / len(ratios), ".12g") if ratios else "",
            "violations": violations(grp),
        })
    return out


def decision_grid(oracle, points: int = 10) -> list:
    """``points`` thresholds evenly spaced in (0, 1.2 * oracle]."""
    top = Fraction(oracle) * Fraction(6, 5) if _exact(oracle) else 1.2 * float(oracle)
    if top == 0:
        top = Fraction(1)
    return [top * Fraction(i, points) if isinstance(top, Fraction) else top * i / points for i in range(1, points + 1)]


def summary_json(summary: list[dict]) -> str:
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"
