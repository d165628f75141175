import csv
import io
import json
import subprocess
import sys

import pytest

from storalloc.cli import main, parse_range, smallest_budget, split_strategies
from storalloc.montecarlo import CSV_COLUMNS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_simulate_minimal_two_nodes(capsys):
    code, out, _ = run(capsys, "simulate", "--k", "2", "--t", "2", "--q", "1", "--snr-db", "3.0103",
                       "--strategy", "minimal", "--trials", "1000000")
    assert code == 0
    (row,) = rows(out)
    p, lo, hi = float(row["p_fail"]), float(row["ci_low"]), float(row["ci_high"])
    se = (hi - lo) / (2 * 1.959963984540054)
    assert abs(p - 0.399576) < 3 * se


def test_simulate_custom_accepted(capsys):
    code, out, _ = run(capsys, "simulate", "--k", "6", "--t", "2.25", "--snr-db", "10",
                       "--strategy", "custom=[1,1,0.25,0,0,0]", "--trials", "2000")
    assert code == 0
    assert rows(out)[0]["strategy"] == "custom[1,1,0.25,0,0,0]"


def test_simulate_underfilled_budget(capsys):
    code, out, _ = run(capsys, "simulate", "--k", "4", "--t", "0.5", "--snr-db", "20",
                       "--strategy", "symmetric", "--trials", "500")
    assert code == 0
    assert float(rows(out)[0]["p_fail"]) == 1.0


def test_simulate_json(capsys):
    code, out, _ = run(capsys, "simulate", "--k", "2", "--t", "2", "--snr-db", "0",
                       "--strategy", "minimal", "--trials", "100", "--format", "json")
    assert code == 0
    assert json.loads(out)["rows"][0]["trials"] == 100


@pytest.mark.parametrize("argv", [
    ["simulate", "--k", "2", "--t", "2"],                                      # missing SNR
    ["simulate", "--k", "2", "--t", "2", "--snr-db", "1", "--strategy", "nope"],
    ["simulate", "--k", "2", "--t", "-1", "--snr-db", "1"],
    ["simulate", "--k", "2", "--t", "3", "--snr-db", "1", "--strategy", "minimal"],
    ["sweep", "--k", "2", "--t", "2", "--snr-db-range", "5:1:0"],              # empty range
    ["orders", "--k-range", "2:5"],                                            # no fixed T
    ["simulate", "--bogus"],
])
def test_usage_errors_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_optimize_guard_exits_3(capsys):
    code, _, err = run(capsys, "optimize", "--k", "20", "--t", "10", "--step", "0.05",
                       "--snr-db", "10", "--trials", "10")
    assert code == 3
    assert "exceed" in err


def test_sweep_single_point_one_row_per_strategy(capsys):
    code, out, _ = run(capsys, "sweep", "--k", "6", "--t", "2", "--snr-db-range", "4:4:1",
                       "--strategies", "symmetric,minimal,custom=[0.5,0.5,0.5,0.5,0,0]",
                       "--trials", "1000")
    assert code == 0
    got = rows(out)
    assert [r["strategy"] for r in got] == ["symmetric", "minimal", "custom[0.5,0.5,0.5,0.5,0,0]"]
    assert list(got[0].keys()) == CSV_COLUMNS


def test_sweep_conditioned_overlay(capsys):
    code, out, _ = run(capsys, "sweep", "--k", "5", "--t", "3", "--strategies", "symmetric",
                       "--snr-db-range", "10:5:40", "--conditioned", "--trials", "2000",
                       "--trials-per-set", "20000")
    assert code == 0
    got = rows(out)
    assert [float(r["snr_db"]) for r in got] == [10, 15, 20, 25, 30, 35, 40]
    for r in got[2:]:
        ratio = float(r["p_cond"]) / float(r["high_snr_approx"])
        assert 0.5 <= ratio <= 2.0


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"k": 2, "t": 2, "snr-db": 3.0, "strategy": "minimal",
                               "trials": 400, "seed": 11}))
    code, out, _ = run(capsys, "simulate", "--config", str(cfg))
    assert code == 0 and rows(out)[0]["trials"] == "400"
    code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--trials", "700")
    assert rows(out)[0]["trials"] == "700"


def test_byte_identical_reruns(tmp_path):
    argv = [sys.executable, "-m", "storalloc", "sweep", "--k", "6", "--t", "2",
            "--snr-db-range", "0:4:2", "--trials", "30000", "--seed", "99"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv + ["--workers", "2"], capture_output=True, check=True).stdout
    assert a == b and a


def test_orders_k_sweep(capsys):
    code, out, _ = run(capsys, "orders", "--k-range", "2:20", "--t", "2")
    assert code == 0
    got = rows(out)
    d = [int(r["d_star"]) for r in got]
    assert len(d) == 19
    assert (d[-1] - d[0]) / 18 == pytest.approx(0.5, abs=0.05)
    for r in got:
        assert float(r["slope_low"]) <= int(r["d_star"]) <= float(r["slope_high"])


def test_orders_t_sweep_converges(capsys):
    code, out, _ = run(capsys, "orders", "--t-range", "1:40:0.5", "--k", "10")
    assert code == 0
    got = rows(out)
    assert got[0]["in_domain"] == "False" and got[0]["d_star"] == ""
    d = [int(r["d_star"]) for r in got[1:]]
    assert d == sorted(d) and d[-1] == 10


def test_orders_target_fraction(capsys):
    code, out, _ = run(capsys, "orders", "--k", "10,200", "--t-range", "1.5:12:0.5",
                       "--target-fraction", "0.8", "--format", "json")
    assert code == 0
    targets = {t["K"]: t for t in json.loads(out)["targets"]}
    assert targets[10]["a_exact"] == pytest.approx(1 / 3)
    assert targets[200]["a_exact"] == pytest.approx(1 / 41)
    assert targets[200]["a_grid"] == pytest.approx(1 / 40)


def test_smallest_budget_meets_target():
    for K in (5, 10, 37, 200):
        t = smallest_budget(K, 0.8)
        from storalloc.analytic import optimal_order
        assert optimal_order(K, t["T_exact"]) >= 0.8 * K
        assert optimal_order(K, t["T_exact"] * 0.999) < 0.8 * K


def test_optimize_ranked_json(capsys):
    code, out, _ = run(capsys, "optimize", "--k", "3", "--t", "1.5", "--step", "0.25",
                       "--snr-db", "30", "--trials", "100000", "--top", "3")
    assert code == 0
    doc = json.loads(out)
    assert doc["ranking"][0]["allocation"] == [0.5, 0.5, 0.5]
    assert len(doc["ranking"]) == 3 and doc["metadata"]["candidates"] == 23


def test_range_parsing():
    assert parse_range("0:10:2") == [0, 2, 4, 6, 8, 10]
    assert parse_range("0:1:20") == [float(x) for x in range(21)]
    assert parse_range("7") == [7.0]
    assert split_strategies("symmetric, custom=[1,0.5], minimal") == [
        "symmetric", "custom=[1,0.5]", "minimal"]
