import json
import subprocess
import sys

import pytest

from unifield.cli import run
from unifield.kernel import k2_kernel


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def k2_file(tmp_path):
    f = tmp_path / "k2.json"
    f.write_text(json.dumps(k2_kernel().to_json()))
    return str(f)


def test_validate_k2(capsys):
    code, out, _ = call(capsys, "validate", "--kernel", "k2")
    assert code == 0
    assert "delta = 0.5" in out and "Assumption 1 holds" in out


def test_validate_example2_reports_failure(capsys):
    code, out, _ = call(capsys, "validate", "--kernel", "example2:0.2")
    assert code == 2
    assert "delta = 0" in out and "Assumption 1 fails" in out


def test_validate_example1_family(capsys):
    code, out, _ = call(capsys, "validate", "--kernel", "example1:0.45,0.45,0.1",
                        "--family", "example1:0.9,1.0")
    assert code == 0 and "Assumption 3 holds" in out and "0.81" in out
    code, out, _ = call(capsys, "validate", "--kernel", "example1:0.45,0.45,0.1",
                        "--family", "example1:0.8,1.0")
    assert code == 2 and "Assumption 3 fails" in out


def test_validate_json(capsys):
    code, out, _ = call(capsys, "validate", "--kernel", "example2:0.15", "--family", "example2:0.15",
                        "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["delta"] == 0 and data["assumption2"] is True
    assert data["delta_tilde"] == pytest.approx(0.614125)


def test_sample_deterministic(capsys, k2_file):
    argv = ["sample", "--kernel", k2_file, "--window", "2", "2", "--reps", "5", "--seed", "7"]
    code, a, _ = call(capsys, *argv)
    _, b, _ = call(capsys, *argv)
    assert code == 0 and a == b
    lines = a.splitlines()
    assert lines[0].startswith("# unifield") and lines[1].startswith("# config: ")
    assert json.loads(lines[1][len("# config: "):])["seed"] == 7
    assert lines[2] == "replicate,b_size,kmax,x1_1,x2_1,x1_2,x2_2"
    assert len(lines) == 3 + 5


@pytest.mark.parametrize("extra", [[], ["--algo", "block", "--family", "example2:0.15",
                                        "--kernel", "example2:0.15"]])
def test_workers_do_not_change_output(tmp_path, extra):
    base = ["sample", "--kernel", "k2", "--window", "3", "2", "--reps", "40", "--seed", "3"] + extra
    outs = []
    for w in ("1", "3"):
        f = tmp_path / f"w{w}.csv"
        assert run(base + ["--workers", w, "--out", str(f)]) == 0
        outs.append(f.read_bytes())
    assert outs[0] == outs[1]


def test_sample_formats(capsys):
    code, out, _ = call(capsys, "sample", "--kernel", "k2", "--window", "3", "2", "--reps", "2",
                        "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data["grids"]) == 2 and data["config"]["window"] == [3, 2]
    assert len(data["grids"][0]["rows"]) == 2 and len(data["grids"][0]["rows"][0]) == 3
    code, out, _ = call(capsys, "sample", "--kernel", "k2", "--window", "3", "2", "--reps", "1",
                        "--format", "pgm")
    lines = [x for x in out.splitlines() if not x.startswith("#")]
    assert lines[:3] == ["P2", "3 2", "255"]
    assert all(v in ("0", "255") for row in lines[3:] for v in row.split())


def test_pgm_rows_top_first(capsys):
    code, csv, _ = call(capsys, "sample", "--kernel", "k2", "--window", "2", "2", "--reps", "1", "--seed", "11")
    _, pgm, _ = call(capsys, "sample", "--kernel", "k2", "--window", "2", "2", "--reps", "1", "--seed", "11",
                     "--format", "pgm")
    x = [int(v) for v in csv.splitlines()[3].split(",")[3:]]  # x1_1, x2_1, x1_2, x2_2
    rows = [x for x in pgm.splitlines() if not x.startswith("#")][3:]
    assert [int(v) // 255 for v in rows[0].split()] == x[2:]
    assert [int(v) // 255 for v in rows[1].split()] == x[:2]


def test_block_and_gates(capsys):
    code, out, _ = call(capsys, "sample", "--kernel", "example2:0.15", "--algo", "block",
                        "--family", "example2:0.15", "--window", "2", "2", "--reps", "3")
    assert code == 0
    code, _, err = call(capsys, "sample", "--kernel", "example2:0.3", "--algo", "block",
                        "--family", "example2:0.3", "--window", "2", "2")
    assert code == 2 and "(d-1)/d" in err
    code, _, err = call(capsys, "sample", "--kernel", "example1:0.45,0.45,0.1", "--window", "2", "2")
    assert code == 2 and "Assumption 1" in err
    code, _, err = call(capsys, "sample", "--kernel", "k2", "--algo", "block",
                        "--family", "example2:0.15", "--window", "2", "2")
    assert code == 1 and "does not realise" in err


def test_step_limit_exit(capsys):
    code, _, err = call(capsys, "sample", "--kernel", "example2:0.3", "--algo", "block",
                        "--family", "example2:0.3", "--window", "6", "6", "--reps", "50",
                        "--force", "--step-limit", "5")
    assert code == 3 and "step limit" in err


def test_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as e:
        run(["sample", "--window", "2"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        run(["bogus"])
    assert e.value.code == 1
    assert call(capsys, "sample", "--window", "2", "2")[0] == 1
    assert call(capsys, "sample", "--kernel", str(tmp_path / "missing.json"), "--window", "2", "2")[0] == 1
    assert call(capsys, "sample", "--kernel", "k2", "--window", "2", "2", "--family", "example2")[0] == 1


def test_percstats(capsys):
    code, out, _ = call(capsys, "percstats", "--kernel", "k2", "--reps", "100", "4", "8")
    lines = out.splitlines()
    assert code == 0 and lines[2].startswith("L,reps,mean_omega")
    assert [r.split(",")[0] for r in lines[3:]] == ["4", "8"]
    code, out, _ = call(capsys, "percstats", "--kernel", "iid:0.5,0.5", "--reps", "10", "4", "--format", "json")
    assert json.loads(out)["rows"][0]["mean_omega"] == 0


def test_oracle_and_compare(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["oracle", "--kernel", "k2", "--window", "1", "1", "--reps", "20000", "--offset", "20",
                "--out", str(a)]) == 0
    assert run(["oracle", "--kernel", "k2", "--window", "1", "1", "--reps", "20000", "--offset", "20",
                "--seed", "1", "--boundary", "iid", "--out", str(b)]) == 0
    data = json.loads(a.read_text())
    assert data["window"] == [1, 1] and data["total"] == 20000
    assert set(data["counts"]) == {"0", "1"}
    code, out, _ = call(capsys, "compare", str(a), str(b))
    rep = json.loads(out)["report"]
    assert code == 0 and rep["pass"] and rep["tv"] < 0.02
    c = tmp_path / "c.json"
    c.write_text(json.dumps({"window": [2, 1], "total": 1, "counts": {"0-0": 1}}))
    assert call(capsys, "compare", str(a), str(c))[0] == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "unifield", "validate", "--kernel", "k2"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "delta = 0.5" in out.stdout
