import json
import subprocess
import sys

import pytest

from sosdecoder import cli


@pytest.fixture
def code_file(tmp_path):
    path = tmp_path / "s3.json"
    assert cli.main(["build-code", "--family", "surface", "--distance", "3", "--out", str(path)]) == 0
    return path


def test_build_code_bad_distance(tmp_path):
    assert cli.main(["build-code", "--family", "surface", "--distance", "1", "--out", str(tmp_path / "x")]) == 2


def test_bad_arguments_exit_2(code_file):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--code", str(code_file), "--p", "1.5", "--out", "x.csv"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["decode-one", "--code", str(code_file), "--p", "0.1", "--decoder", "magic"])
    assert exc.value.code == 2
    assert cli.main(["decode-one", "--code", "/nonexistent.json", "--p", "0.1"]) == 2


def test_decode_one(code_file, tmp_path, capsys):
    dump = tmp_path / "m.json"
    rc = cli.main(["decode-one", "--code", str(code_file), "--p", "0.1", "--seed", "2",
                   "--level", "2", "--dump-moments", str(dump)])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["feasible"] and "moment_rank" in report
    assert json.loads(dump.read_text())["level"] == 2
    assert cli.main(["decode-one", "--code", str(code_file), "--p", "0.1", "--decoder", "exact",
                     "--dump-moments", str(dump)]) == 2


def test_run_reproducible(code_file, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.csv"
        args = ["run", "--code", str(code_file), "--decoder", "sos", "--level", "1",
                "--p", "0.08", "--trials", "30", "--seed", "4", "--out", str(out)]
        assert cli.main(args) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_sweep_and_fit(tmp_path):
    codes = []
    for d in (3, 5):
        path = tmp_path / f"s{d}.json"
        cli.main(["build-code", "--family", "surface", "--distance", str(d), "--out", str(path)])
        codes.append(str(path))
    res = tmp_path / "sweep.csv"
    assert cli.main(["sweep", "--codes", ",".join(codes), "--decoder", "exact", "--p-min", "0.06",
                     "--p-max", "0.14", "--p-steps", "5", "--trials", "400", "--seed", "1",
                     "--out", str(res)]) == 0
    fit = tmp_path / "fit.json"
    rc = cli.main(["fit-threshold", "--in", str(res), "--out", str(fit)])
    assert rc in (0, 3)
    assert set(json.loads(fit.read_text())) == {"p_th", "nu", "a", "b", "c", "residual", "converged"}
    assert cli.main(["sweep", "--codes", codes[0], "--p-min", "0.2", "--p-max", "0.1",
                     "--p-steps", "2", "--out", str(res)]) == 2


def test_fit_one_distance_exit_2(code_file, tmp_path):
    res = tmp_path / "one.csv"
    cli.main(["sweep", "--codes", str(code_file), "--decoder", "exact", "--p-min", "0.05",
              "--p-max", "0.1", "--p-steps", "4", "--trials", "20", "--out", str(res)])
    assert cli.main(["fit-threshold", "--in", str(res), "--out", str(tmp_path / "f.json")]) == 2


def test_compare(code_file, tmp_path):
    out = tmp_path / "cmp.csv"
    rc = cli.main(["compare", "--code", str(code_file), "--instances", "2", "--level", "1",
                   "--seed", "3", "--out", str(out)])
    assert rc in (0, 3)
    assert out.read_text().startswith("instance_id,method,level,value,exact_value,gap")


def test_console_entry_point(tmp_path):
    out = tmp_path / "c.json"
    proc = subprocess.run([sys.executable, "-m", "sosdecoder.cli", "build-code", "--family", "color",
                           "--distance", "3", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["n"] == 7
    proc = subprocess.run([sys.executable, "-m", "sosdecoder.cli", "nonsense"], capture_output=True)
    assert proc.returncode == 2
