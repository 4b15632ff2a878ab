import csv
import json

import pytest

from gvc_randlab.cli import main, parse_args


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


SMALL = ["--n", "20", "--instances", "12", "--sector", "3"]


def test_simulate_outputs(tmp_path):
    assert main(["simulate", *SMALL, "--out", str(tmp_path), "--format", "csv,json,svg"]) == 0
    rows = _read(tmp_path / "records.csv")
    assert list(rows[0]) == ["instance", "U1", "D1", "U_tilde", "D_tilde", "violations"]
    assert [r["instance"] for r in rows] == [str(k) for k in range(12)]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["params"]["sector"] == 3 and summary["params"]["sector_indexing"] == "1-based"
    assert (tmp_path / "scatter.svg").read_text().startswith("<svg")


def test_simulate_no_flows(tmp_path):
    assert main(["simulate", *SMALL, "--sparsity", "1", "--out", str(tmp_path), "--format", "csv,json"]) == 0
    for r in _read(tmp_path / "records.csv"):
        assert r["U1"] == r["D1"] == r["U_tilde"] == r["D_tilde"] == "1"
    assert json.loads((tmp_path / "summary.json").read_text())["U1_vs_D1"] is None


def test_simulate_worker_invariance(tmp_path):
    outs = []
    for w in (1, 8):
        d = tmp_path / f"w{w}"
        assert main(["simulate", *SMALL, "--workers", str(w), "--out", str(d), "--format", "csv"]) == 0
        outs.append((d / "records.csv").read_bytes())
    assert outs[0] == outs[1]


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nn = 15\nmuf=0.05\ninstances=5\nseed=9\n")
    args = parse_args(["simulate", "--config", str(cfg), "--n", "17"])
    assert (args.n, args.muf, args.instances, args.seed) == (17, 0.05, 5, 9)


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n=10\nbogus=1\n")
    assert main(["simulate", "--config", str(cfg)]) == 2


def test_env_seed(monkeypatch):
    monkeypatch.setenv("GVC_RANDLAB_SEED", "42")
    assert parse_args(["simulate"]).seed == 42
    assert parse_args(["simulate", "--seed", "3"]).seed == 3


def test_invalid_model_input(tmp_path):
    assert main(["simulate", "--n", "0", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--n", "5", "--sector", "7", "--out", str(tmp_path)]) == 2
    assert main(["simulate", *SMALL, "--workers", "0", "--out", str(tmp_path)]) == 2


def test_scatter(tmp_path):
    assert main(["scatter", *SMALL, "--x", "U_tilde", "--y", "U1", "--out", str(tmp_path)]) == 0
    info = json.loads((tmp_path / "scatter.json").read_text())
    assert info["x"] == "U_tilde" and info["points"] == 12


def test_sparsity(tmp_path):
    argv = ["sparsity", "--n", "20", "--instances", "10", "--sparsities", "0,0.2", "--out", str(tmp_path)]
    assert main(argv) == 0
    assert [r["sparsity"] for r in _read(tmp_path / "sparsity.csv")] == ["0", "0.20000000000000001"]


def test_analytic_table1_preset(tmp_path):
    assert main(["analytic", "--preset", "table1", "--out", str(tmp_path)]) == 0
    rows = _read(tmp_path / "analytic.csv")
    expected = [0.10385, 0.29494, 0.06158, 0.17260, 0.23955]
    assert [abs(float(r["C_N"]) - e) < 5e-5 for r, e in zip(rows, expected)] == [True] * 5
    assert all(r["status"] == "ok" for r in rows)


def test_analytic_grid_ranges(tmp_path):
    assert main(["analytic", "--n", "1:3,10", "--mu", "1,2", "--muf", "0.1", "--out", str(tmp_path)]) == 0
    assert len(_read(tmp_path / "analytic.csv")) == 8


def test_curve(tmp_path):
    assert main(["curve", "--n-max", "50", "--out", str(tmp_path)]) == 0
    assert len(_read(tmp_path / "curve.csv")) == 200


def test_table1_custom_row(tmp_path):
    argv = ["table1", "--rows", "1,0.05,30", "--instances", "1000", "--bootstrap", "100",
            "--z-max", "1e9", "--out", str(tmp_path)]
    assert main(argv) == 0
    (row,) = _read(tmp_path / "table1.csv")
    assert row["N"] == "30"


def test_oracle_check(tmp_path):
    argv = ["oracle-check", "--k", "2,11", "--samples", "20000", "--out", str(tmp_path)]
    assert main(argv) == 0
    rows = _read(tmp_path / "oracle_check.csv")
    assert rows and all(r["pass"] == "true" for r in rows)
    assert main([*argv, "--tolerance", "1e-30"]) == 1


def test_ingest_and_measure(toy_csv, tmp_path):
    assert main(["ingest", str(toy_csv), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "ingest.json").read_text())["density"] == 0.5
    assert main(["measure", str(toy_csv), "--out", str(tmp_path)]) == 0
    rows = _read(tmp_path / "measures.csv")
    assert [r["sector"] for r in rows] == ["Agri", "Manu"]
    got = [(float(r["U1"]), float(r["D1"])) for r in rows]
    assert got == [pytest.approx((2.25, 3.0), rel=1e-14), pytest.approx((2.5, 2.0), rel=1e-14)]


def test_ingest_bad_table(tmp_path):
    p = tmp_path / "neg.csv"
    p.write_text("SECTOR,A,B,FINAL_DEMAND\nA,0,-1,1\nB,1,0,1\n")
    assert main(["ingest", str(p), "--out", str(tmp_path)]) == 2
    assert main(["measure", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2


def test_bad_format_flag():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--format", "xml"])
    assert exc.value.code == 2
