import json
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from cylwalk import cli
from cylwalk.report import OpResult, RunReport, Table, exact, mc, windowed, worst


# ---------------------------------------------------------------- report


def test_provenance_tags():
    assert exact(Fraction(1, 4)) == {"value": 0.25, "provenance": "exact"}
    assert mc(0.5, 0.01) == {"value": 0.5, "provenance": "mc", "stderr": 0.01}
    assert windowed(1.0, 1e-3) == {"value": 1.0, "provenance": "windowed", "error": 1e-3}
    assert exact(np.int64(3))["value"] == 3 and exact(np.bool_(True))["value"] is True
    assert exact(float("inf"))["value"] == "inf"


def test_worst_status():
    assert worst([]) == "pass"
    assert worst(["pass", "inconclusive"]) == "inconclusive"
    assert worst(["inconclusive", "fail", "pass"]) == "fail"


def test_table_repr_floats(tmp_path):
    Table(["a", "b", "c"], [[0.1, 2, Fraction(1, 3)], [True, 1e-20, "x"]]).write(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_bytes() == b"a,b,c\n0.1,2,1/3\n1,1e-20,x\n"


def test_run_report_write(tmp_path):
    rep = RunReport("demo", {"seed": 1}, [
        OpResult("one", {"N": 4}, {"x": exact(1)}, "pass", tables={"t": Table(["k"], [[1]])}),
        OpResult("two", {}, {}, "inconclusive"),
    ])
    assert rep.status == "inconclusive" and rep.exit_code == 3
    paths = rep.write(tmp_path)
    assert sorted(os.path.basename(p) for p in paths) == ["one_t.csv", "report.json"]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["config"] == {"seed": 1} and doc["results"][0]["values"]["x"]["provenance"] == "exact"


# ---------------------------------------------------------------- CLI


def run_cli(args, tmp_path, capsys):
    code = cli.main(list(args) + ["--out", str(tmp_path)])
    out = capsys.readouterr()
    return code, out.out, out.err


def echoed(stdout):
    return json.loads(stdout.splitlines()[0])


def test_identity_pass(tmp_path, capsys):
    code, out, _ = run_cli(["identity", "--d", "2", "--N", "4", "--seed", "1"], tmp_path, capsys)
    assert code == 0
    cfg = echoed(out)["config"]
    assert cfg["N"] == [4] and cfg["seed"] == 1 and cfg["d"] == 2
    doc = json.loads((tmp_path / "identity" / "report.json").read_text())
    assert doc["config"]["seed"] == 1
    assert doc["results"][0]["values"]["max_residual"]["value"] <= 1e-9


def test_missing_key_no_output(tmp_path, capsys):
    code, out, err = run_cli(["identity", "--d", "2"], tmp_path, capsys)
    assert code == 65 and "N" in err
    assert not os.listdir(tmp_path)


def test_unknown_subcommand(tmp_path, capsys):
    code, _, _ = run_cli(["frobnicate"], tmp_path, capsys)
    assert code == 64
    assert not os.listdir(tmp_path)


def test_unknown_flag(tmp_path, capsys):
    assert run_cli(["identity", "--d", "2", "--N", "4", "--bogus", "1"], tmp_path, capsys)[0] == 64


def test_bad_values(tmp_path, capsys):
    assert run_cli(["identity", "--d", "2", "--N", "four"], tmp_path, capsys)[0] == 65
    # v must exceed (d+1) alpha
    assert run_cli(["dominate", "--d", "2", "--N", "12", "--alpha", "1", "--v", "2"], tmp_path, capsys)[0] == 65
    assert run_cli(["suite", "--scale", "huge"], tmp_path, capsys)[0] == 65
    assert not os.listdir(tmp_path)


def test_config_file_and_flag_precedence(tmp_path, capsys):
    conf = tmp_path / "run.ini"
    conf.write_text("# identity run\nd = 2\nN = 4\nreps = 2\nseed = 5\n")
    out_dir = tmp_path / "o"
    code = cli.main(["identity", "--config", str(conf), "--seed", "9", "--out", str(out_dir)])
    cfg = echoed(capsys.readouterr().out)["config"]
    assert code == 0 and cfg["seed"] == 9 and cfg["reps"] == 2


def test_config_file_unknown_key(tmp_path, capsys):
    conf = tmp_path / "bad.ini"
    conf.write_text("[run]\nd = 2\nN = 4\ncolour = red\n")
    assert cli.main(["identity", "--config", str(conf), "--out", str(tmp_path / "o")]) == 65
    assert cli.main(["identity", "--config", str(tmp_path / "none.ini")]) == 65


def test_env_output_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CYLWALK_OUT", str(tmp_path / "env"))
    assert cli.main(["ld-check", "--N", "10", "--v", "0.5", "--n", "8"]) == 0
    assert (tmp_path / "env" / "ld-check" / "ld_check_cases.csv").exists()


def test_failure_exit(tmp_path, capsys):
    code, _, _ = run_cli(["vacant", "--u", "1", "--reps", "2000", "--tol", "0"], tmp_path, capsys)
    assert code == 2


def test_inconclusive_exit(tmp_path, capsys):
    code, _, _ = run_cli(["sprinkle", "--d", "2", "--N", "16", "--epsilon", "0.5"], tmp_path, capsys)
    assert code == 3


def test_budget_exit(tmp_path, capsys):
    code, _, err = run_cli(["disconnect", "--d", "2", "--N", "6", "--reps", "1", "--budget", "100"],
                           tmp_path, capsys)
    assert code == 70 and "budget" in err
    assert not os.listdir(tmp_path)


def test_provenance_everywhere(tmp_path, capsys):
    run_cli(["homogenize", "--d", "2", "--N", "4,6", "--reps", "200"], tmp_path, capsys)
    doc = json.loads((tmp_path / "homogenize" / "report.json").read_text())

    def walk(v):
        if isinstance(v, dict) and "provenance" in v:
            assert v["provenance"] in ("exact", "mc", "windowed")
            return 1
        if isinstance(v, dict):
            return sum(walk(x) for x in v.values())
        if isinstance(v, list):
            return sum(walk(x) for x in v)
        return 0

    assert walk(doc["results"][0]["values"]) >= 3


def csv_bytes(d):
    return {f: open(os.path.join(d, f), "rb").read() for f in sorted(os.listdir(d)) if f.endswith(".csv")}


def test_byte_identical_reruns(tmp_path, capsys):
    args = ["potential-check", "--d", "2", "--N", "4", "--reps", "6", "--seed", "3"]
    cli.main(args + ["--out", str(tmp_path / "a")])
    cli.main(args + ["--out", str(tmp_path / "b")])
    a, b = csv_bytes(tmp_path / "a" / "potential-check"), csv_bytes(tmp_path / "b" / "potential-check")
    assert a and a == b


def test_workers_do_not_change_results(tmp_path, capsys):
    base = ["disconnect", "--d", "2", "--N", "4", "--reps", "4", "--seed", "2"]
    assert cli.main(base + ["--out", str(tmp_path / "s")]) == 0
    assert cli.main(base + ["--workers", "2", "--out", str(tmp_path / "p")]) == 0
    assert csv_bytes(tmp_path / "s" / "disconnect") == csv_bytes(tmp_path / "p" / "disconnect")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cylwalk", "ld-check", "--N", "10", "--v", "0.5", "--n", "8",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout.splitlines()[0])["command"] == "ld-check"


@pytest.mark.slow
def test_zeta_example(tmp_path, capsys):
    code, _, _ = run_cli(["zeta", "--u", "1", "--theta", "1", "--reps", "100000", "--n", "10000"],
                         tmp_path, capsys)
    doc = json.loads((tmp_path / "zeta" / "report.json").read_text())
    assert abs(doc["results"][0]["values"]["z"]["value"]) <= 3
    assert code == 0


@pytest.mark.slow
def test_suite_forced_failure(tmp_path, capsys):
    code, _, _ = run_cli(["suite", "--scale", "quick", "--tol", "0"], tmp_path, capsys)
    assert code == 2
    doc = json.loads((tmp_path / "suite" / "report.json").read_text())
    # exact checks with zero residual still pass at zero tolerance
    assert "fail" in {r["status"] for r in doc["results"][:-1]}
    assert doc["results"][-1]["op"] == "c12_reproducibility"
