import json
import subprocess
import sys

import pytest

from wtile import cli
from wtile.core import TileRuleSet


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def doc_of(capsys, *argv):
    code, out, _ = run_cli(capsys, *argv)
    assert code == 0, out
    return json.loads(out)


@pytest.fixture
def rules_file(tmp_path):
    r = TileRuleSet(["a", "b"], horizontal={("a", "b"): 1, ("b", "a"): 1}, vertical={("a", "a"): 2})
    p = tmp_path / "rules.json"
    p.write_text(json.dumps(r.to_json()))
    return p


def test_reduce_and_mu(capsys):
    assert doc_of(capsys, "reduce", "--x", "1") == 11
    assert doc_of(capsys, "mu", "--n", "16") == 2


def test_bad_bits_is_usage_error(capsys):
    code, _, err = run_cli(capsys, "reduce", "--x", "12")
    assert code == 2 and "bit string" in err


def test_small_n_is_usage_error(capsys):
    assert run_cli(capsys, "mu", "--n", "3")[0] == 2


def test_simulate_layer1(capsys):
    doc = doc_of(capsys, "simulate", "--layer", "1", "--n", "16", "--dump-final")
    assert doc["sizes"] == [4, 2]
    assert doc["end_rows"] == [1, 5]
    assert "final_row" in doc


def test_simulate_pretty_writes_stderr(capsys):
    code, out, err = run_cli(capsys, "--pretty", "simulate", "--layer", "1", "--n", "11")
    assert code == 0 and err.count("\n") == 9
    json.loads(out)


def test_simulate_layer3_gwt(capsys):
    doc = doc_of(capsys, "simulate", "--layer", "3", "--n", "11")
    assert doc["variant"] == "gwt"
    assert doc["rejections"] == sum(s["rejections"] for s in doc["strips"])


def test_simulate_layer4_roles(capsys):
    doc = doc_of(capsys, "simulate", "--layer", "4", "--n", "300", "--problem", "echo", "--x", "1")
    assert len(doc["roles"]) == len(doc["sizes"])


def test_solve_and_witness(capsys, rules_file, tmp_path):
    wit = tmp_path / "w.json"
    doc = doc_of(capsys, "solve", "--rules", str(rules_file), "--height", "3", "--width", "3", "--witness", str(wit))
    assert doc["min_cost"] == 0
    assert wit.exists()
    ex = doc_of(capsys, "solve", "--rules", str(rules_file), "--height", "3", "--width", "3", "--exhaustive")
    assert ex["min_cost"] == doc["min_cost"]


def test_budget_exceeded_exit_code(capsys, rules_file):
    code, _, err = run_cli(capsys, "solve", "--rules", str(rules_file), "--height", "3", "--width", "4",
                           "--budget", "3")
    assert code == 3 and "capacity" in err


def test_missing_file_exit_code(capsys, tmp_path):
    assert run_cli(capsys, "solve", "--rules", str(tmp_path / "nope.json"), "--height", "2", "--width", "2")[0] == 2


def test_compile_squares_round_trip(capsys, rules_file, tmp_path):
    out = tmp_path / "pairs.json"
    doc = doc_of(capsys, "compile-squares", "--rules", str(rules_file), "--out", str(out))
    compiled = TileRuleSet.from_json(json.loads(out.read_text()))
    assert compiled.d == doc["tiles"]


def test_krentel(capsys):
    doc = doc_of(capsys, "krentel", "--problem", "echo", "--x", "1", "--z", "1")
    assert set(doc) == {"problem", "x", "z", "C", "target"}
    assert run_cli(capsys, "krentel", "--problem", "nosuch", "--x", "1", "--z", "1")[0] == 2


def test_inject_then_audit(capsys, tmp_path):
    out = tmp_path / "t.json"
    doc = doc_of(capsys, "inject", "--n", "256", "--seed", "4", "--count", "2", "--out", str(out))
    assert doc["plan"] == {"seed": 4, "count": 2, "placement": "uniform"}
    again = doc_of(capsys, "audit", "--tiling", str(out))
    assert again["F"] == doc["F"]
    assert again["passed"]


def test_audit_fault_free(capsys):
    doc = doc_of(capsys, "audit", "--n", "16")
    assert doc["F"] == {"1": 0} and doc["passed"]


def test_repeat_runs_are_byte_identical():
    argv = [sys.executable, "-m", "wtile", "inject", "--n", "256", "--seed", "11", "--count", "3"]
    a = subprocess.run(argv, capture_output=True, check=False)
    b = subprocess.run(argv, capture_output=True, check=False)
    assert a.returncode == b.returncode == 0
    assert a.stdout == b.stdout and a.stdout
