import csv
import io
import json
from fractions import Fraction

import pytest

from xosketch import dump_instance, harness, load_instance
from xosketch.cli import main
from xosketch.harness import RunConfig, decision_grid, parse_instance_spec, rows_to_csv, run_battery, summarize


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_spec():
    spec = parse_instance_spec("random:bxos:m=2-10,t=6,count=5")
    assert spec.params == {"m": (2, 10), "t": 6, "count": 5} and spec.count == 5
    assert parse_instance_spec("f1:eps=1/10,m=400").params["eps"] == Fraction(1, 10)
    with pytest.raises(ValueError, match="unknown key"):
        parse_instance_spec("random:bxos:m=4,size=3")
    with pytest.raises(ValueError):
        parse_instance_spec("random:bxos:t=3")
    with pytest.raises(ValueError):
        parse_instance_spec("no/such/path.json")


def test_random_family_defaults():
    for _, inst in harness.iter_instances("random:bxos:m=8,count=30", seed=0):
        for v in inst.players:
            assert 2 <= v.t <= 8
            sizes = v.matrix.sum(axis=1)
            assert ((sizes >= 2) & (sizes <= 6)).all()


def test_instances_do_not_depend_on_count():
    a = dict(harness.iter_instances("random:xos:m=5,count=3", seed=9))
    b = dict(harness.iter_instances("random:xos:m=5,count=6", seed=9))
    for i in a:
        assert (a[i].players[0].matrix == b[i].players[0].matrix).all()


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig("7")
    with pytest.raises(ValueError):
        RunConfig("3")
    with pytest.raises(ValueError):
        RunConfig("3", k=4, mode="decision", X=Fraction(1))
    with pytest.raises(ValueError):
        RunConfig("5", k=8, mode="decision")


def test_rows_and_ratio():
    rows = run_battery(RunConfig("3", k=4), "random:bxos:m=6,count=20", seed=1)
    assert len(rows) == 20
    for r in rows:
        assert r["ratio"] == Fraction(r["achieved"]) / r["oracle"]
        assert r["bound_satisfied"] and r["bits"] == 6 and r["rounds"] == 1


def test_worker_count_does_not_change_output():
    cfg = RunConfig("6", k=4)
    one = rows_to_csv(run_battery(cfg, "random:xos:m=5,count=8", seed=2, threads=1), harness.columns_for(cfg))
    two = rows_to_csv(run_battery(cfg, "random:xos:m=5,count=8", seed=2, threads=2), harness.columns_for(cfg))
    assert one == two


def test_decision_grid():
    grid = decision_grid(5)
    assert len(grid) == 10 and grid[-1] == 6 and grid[0] == Fraction(3, 5)
    assert decision_grid(0)[-1] == 1


def test_summarize_monotone_p3():
    rows = []
    for k in (2, 4, 8, 16):
        rows += run_battery(RunConfig("3", k=k), "random:bxos:m=8,t=6,count=40", seed=4)
    summary = summarize(rows)
    mins = [Fraction(s["min_ratio"]) for s in summary]
    assert all(s["violations"] == 0 for s in summary)
    assert all(mn >= Fraction(3, 4) - Fraction(1, k) for mn, k in zip(mins, (2, 4, 8, 16)))


# -- CLI ---------------------------------------------------------------------------------------


def test_cli_run(capsys):
    assert main(["run", "--protocol", "3", "--k", "4", "--instances", "random:bxos:m=8,t=6,count=40", "--seed", "7"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 40 and all(r["bound_satisfied"] == "true" for r in rows)
    assert "wall_time" not in rows[0]


def test_cli_decision(capsys):
    assert main(["run", "--protocol", "5", "--mode", "decision", "--X", "6", "--k", "8",
                 "--instances", "random:xos:m=2-8,t=1-6,count=30", "--seed", "3"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert {r["answer"] for r in rows} <= {"yes", "no"}
    assert all(r["decision_ok"] == "true" for r in rows)


def test_cli_mechanism(capsys):
    assert main(["run", "--mechanism", "--n", "3", "--k", "4", "--m", "6", "--count", "20", "--seed", "1"]) == 0
    rows = _rows(capsys.readouterr().out)
    for r in rows:
        assert len(r["payments"].split(";")) == 3
        assert Fraction(r["min_utility"]) >= 0


def test_cli_timing_column(capsys):
    main(["run", "--protocol", "1", "--count", "3", "--seed", "0", "--timing"])
    assert "wall_time" in _rows(capsys.readouterr().out)[0]


def test_cli_oracle_only_matches_rows(capsys):
    main(["run", "--protocol", "2", "--instances", "random:xos:m=5,count=10", "--seed", "5"])
    rows = _rows(capsys.readouterr().out)
    main(["oracle", "--instances", "random:xos:m=5,count=10", "--seed", "5"])
    oracle = _rows(capsys.readouterr().out)
    assert [r["oracle"] for r in rows] == [r["oracle"] for r in oracle]


def test_cli_gen_round_trip(tmp_path, capsys):
    assert main(["gen", "random", "--m", "6", "--t", "4", "--count", "10", "--seed", "0", "--out", str(tmp_path)]) == 0
    files = sorted(tmp_path.glob("*.json"))
    assert len(files) == 10
    for f in files:
        text = f.read_text()
        assert dump_instance(load_instance(f)) == text
    # a directory is a valid instance spec
    assert main(["oracle", "--instances", str(tmp_path), "--seed", "0"]) == 0
    assert len(_rows(capsys.readouterr().out)) == 10


def test_cli_gen_appendix_g(tmp_path, capsys):
    main(["gen", "appendix-g", "--m", "108", "--l", "64", "--seed", "2", "--force-m", "1", "--out", str(tmp_path)])
    main(["oracle", "--instances", str(tmp_path), "--seed", "0"])
    assert _rows(capsys.readouterr().out)[0]["oracle"] == "108"


def test_cli_gen_f1_flags_unverified(capsys):
    assert main(["gen", "f1", "--eps", "0.1", "--m", "200", "--seed", "1", "--retries", "2"]) == 0
    out = capsys.readouterr()
    assert "UNVERIFIED" in out.err
    assert json.loads(out.out)["provenance"]["verified"] is False


def test_cli_sweep(tmp_path, capsys):
    summary = tmp_path / "s.json"
    assert main(["sweep", "--protocol", "3,6,baseline", "--k", "2,4", "--instances", "random:bxos:m=6,count=15",
                 "--seed", "0", "--summary", str(summary)]) == 0
    rows = _rows(capsys.readouterr().out)
    data = json.loads(summary.read_text())
    assert len(rows) == 90 and all(d["violations"] == 0 for d in data)
    base = [d for d in data if d["protocol"] == "baseline"]
    assert all(Fraction(d["min_ratio"]) >= Fraction(1, 2) for d in base)
    p3 = {(r["instance"], r["k"]): Fraction(r["ratio"]) for r in rows if r["protocol"] == "3"}
    p6 = {(r["instance"], r["k"]): Fraction(r["ratio"]) for r in rows if r["protocol"] == "6"}
    assert all(p6[key] >= p3[key] for key in p3)


def test_cli_verify_lemma_and_mechanism(capsys):
    assert main(["verify", "lemma", "--instances", "random:bxos:m=2-8,t=1-6,count=10", "--k", "3", "--seed", "0"]) == 0
    capsys.readouterr()
    assert main(["verify", "mechanism", "--m", "2", "--t", "2", "--k", "2"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert all(r["certified"] == "true" for r in rows)


def test_cli_errors(capsys):
    assert main(["run", "--protocol", "3", "--k", "4", "--instances", "random:bxos:m=4,bogus=1", "--seed", "0"]) == 2
    assert "unknown key" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["run", "--protocol", "3", "--k", "4"])  # --seed is mandatory
