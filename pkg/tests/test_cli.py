import json
import subprocess
import sys
from pathlib import Path

import pytest

import cli as m

TESTS_DATA = Path(__file__).resolve().parent / "data"
CLI = Path(__file__).resolve().parents[1] / "martsel" / "cli.py"


def run(capsys, *argv):
    code = m.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out else None), err


def test_solve_unsolvable(capsys):
    code, report, _ = run(capsys, "solve", "--input", TESTS_DATA / "point-masses.json")
    assert code == m.EXIT_NEGATIVE
    assert report["verdict"] == "unsolvable"
    assert report["failure"] == {"level": 0, "node": "0:0"}
    assert "W" not in report


def test_solve(capsys):
    code, report, _ = run(capsys, "solve", "--input", TESTS_DATA / "drift.json",
                          "--node", "2:0", "--emit-w-tables")
    assert code == m.EXIT_OK
    assert report["verdict"] == "solvable"
    assert [s["anchor"] for s in report["solutions"]] == ["2:0"]
    assert report["W"]["W"]["0:0"]["dim"] == 2


def test_solution_certificate(capsys, tmp_path):
    cert = tmp_path / "cert.json"
    code, _, _ = run(capsys, "solve", "--input", TESTS_DATA / "drift.json",
                     "--emit-certificate", cert)
    assert code == m.EXIT_OK
    code, report, _ = run(capsys, "verify", "--input", cert)
    assert code == m.EXIT_OK
    assert report == {"command": "verify", "kind": "solutions", "ok": True, "violations": []}

    obj = json.loads(cert.read_text())
    obj["solutions"][0]["xi"]["1:0"] = ["0", "1/2"]
    cert.write_text(json.dumps(obj))
    code, report, err = run(capsys, "verify", "--input", cert)
    assert code == m.EXIT_ERROR
    assert not report["ok"]
    assert "violated" in err


def test_ftap_frictionless(capsys, tmp_path):
    out = tmp_path / "report.json"
    code, report, _ = run(capsys, "ftap", "--input", TESTS_DATA / "binomial.json",
                          "--model", "frictionless", "--node", "1:0", "--out", out)
    assert code == m.EXIT_OK
    assert report is None
    report = json.loads(out.read_text())
    assert report["verdict"] == "no-arbitrage"
    assert report["price_systems"][0]["P"] == {"1:0": "1/3", "1:1": "2/3"}


def test_ftap_arbitrage_certificate(capsys, tmp_path):
    cert = tmp_path / "cert.json"
    code, report, _ = run(capsys, "ftap", "--input", TESTS_DATA / "bidask-disjoint.json",
                          "--emit-certificate", cert)
    assert code == m.EXIT_NEGATIVE
    assert report["verdict"] == "arbitrage"
    assert report["failure"] == "0:0"
    code, report, _ = run(capsys, "verify", "--input", cert)
    assert code == m.EXIT_OK
    assert report["kind"] == "arbitrage"

    obj = json.loads(cert.read_text())
    terminal = obj["certificate"]["terminal"]
    for leaf in terminal:
        terminal[leaf] = ["5", "5"]
    cert.write_text(json.dumps(obj))
    code, report, _ = run(capsys, "verify", "--input", cert)
    assert code == m.EXIT_ERROR
    assert not report["ok"]


def test_ftap_price_system_certificate(capsys, tmp_path):
    cert = tmp_path / "cert.json"
    code, _, _ = run(capsys, "ftap", "--input", TESTS_DATA / "cost-overlap.json",
                     "--emit-certificate", cert)
    assert code == m.EXIT_OK
    code, report, _ = run(capsys, "verify", "--input", cert)
    assert code == m.EXIT_OK
    assert report["kind"] == "price_systems"


def test_ftap_cross_check(capsys):
    code, report, _ = run(capsys, "ftap", "--input", TESTS_DATA / "bidask-overlap.json",
                            "--cross-check", "--dominating")
    assert code == m.EXIT_OK
    assert report["oracle"] == {"arbitrage": False, "agree": True}
    assert report["dominating"]["model"] == "kabanov"


def test_ftap_needs_market_model(capsys):
    code, report, err = run(capsys, "ftap", "--input", TESTS_DATA / "point-masses.json")
    assert code == m.EXIT_ERROR
    assert report is None
    assert err.startswith("[martsel]")
    code, _, _ = run(capsys, "ftap", "--input", TESTS_DATA / "binomial.json", "--model", "msp")
    assert code == m.EXIT_ERROR


def test_oracle(capsys):
    code, report, _ = run(capsys, "oracle", "--input", TESTS_DATA / "point-masses-conical.json")
    assert code == m.EXIT_NEGATIVE
    assert report["solver"] is False
    assert report["agree"] is True
    assert report["oracle"] == {"0:0": True, "1:0": True, "1:1": False, "1:2": False}
    code, _, err = run(capsys, "oracle", "--input", TESTS_DATA / "point-masses.json")
    assert code == m.EXIT_ERROR
    assert "conical" in err


def test_input_errors(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "--input", tmp_path / "missing.json")
    assert code == m.EXIT_ERROR
    assert err
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps({"model": "msp", "dim": 1, "tree": {"branching": [1]}}))
    code, _, err = run(capsys, "solve", "--input", broken)
    assert code == m.EXIT_ERROR
    assert 'missing key "V"' in err
    with pytest.raises(SystemExit):
        m.main(["solve", "--input", str(broken), "--node", "leaf"])


def test_run_config():
    config = m.RunConfig("solve", "x.json", nodes=[(1, 0)])
    assert config.input == Path("x.json")
    assert config.nodes == [(1, 0)]
    with pytest.raises(ValueError):
        m.RunConfig("plot", "x.json")
    with pytest.raises(ValueError):
        m.RunConfig("solve", "x.json", model="bond")


def test_script():
    proc = subprocess.run(
        [sys.executable, str(CLI), "solve", "--input", str(TESTS_DATA / "point-masses.json")],
        capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stdout)["verdict"] == "unsolvable"
