import csv
import io
import json
import math
import subprocess
import sys

import pytest

from curvheat import cli, spectra
from curvheat.cli import parse_p_range, run
from curvheat.coefficients import e0_trace, e1_kahler


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_coeff_torus(capsys):
    code, out, _ = call(capsys, "coeff", "--geometry", "torus:d=1,A=1", "--u", "0.5", "--q", "0")
    assert code == 0
    (row,) = rows(out)
    assert float(row["e0_trace"]) == e0_trace([2 * math.pi], 0.5, 0)
    # (4 pi)^-1 e^{pi} pi / sinh(pi) on a unit-area torus
    assert float(row["e0_trace"]) == pytest.approx(0.5 / (1 - math.exp(-2 * math.pi)), rel=1e-14)
    assert float(row["e1_kahler"]) == 0.0


def test_verify_cp1(capsys):
    code, out, err = call(capsys, "verify", "--geometry", "cp1", "--p", "5", "--u", "1")
    assert code == 0, err
    table = rows(out)
    ms = [r for r in table if r["suite"] == "mckean_singer"]
    assert ms and float(ms[0]["value"]) == 6.0
    assert all(r["verdict"] == "pass" for r in table)


def test_verify_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(spectra, "mckean_singer", lambda g, p, u: 7.0)
    code, out, err = call(capsys, "verify", "--geometry", "cp1", "--p", "5", "--u", "1")
    assert code == 1
    assert err.startswith("ERROR 1:")


def test_fit_cp1(capsys):
    code, out, err = call(capsys, "fit", "--geometry", "cp1", "--u", "0.5", "--p", "32:256:log", "--k", "1", "--q", "0")
    assert code == 0, err
    table = rows(out)
    assert [int(r["r"]) for r in table] == [0, 1]
    c1 = table[1]
    assert float(c1["predicted"]) == pytest.approx(e1_kahler(0.5, 8 * math.pi), rel=1e-15)
    assert float(c1["rel_diff"]) < 0.02
    assert float(c1["condition"]) > 0


def test_p_range_grammar():
    assert parse_p_range("32:256:log") == [32, 48, 64, 96, 128, 192, 256]
    assert parse_p_range("5:20:5") == [5, 10, 15, 20]
    assert parse_p_range("10:80:log4") == [10, 20, 40, 80]
    assert parse_p_range("20,5,10,5") == [5, 10, 20]
    for bad in ("a", "1:2", "10:5:1", "1:10:0", "1:10:logx", "0:4:1", "5:5:log"):
        with pytest.raises(cli.UsageError):
            parse_p_range(bad)


@pytest.mark.parametrize(
    "argv",
    [
        ["coeff"],
        ["nope", "--geometry", "cp1"],
        ["coeff", "--geometry", "cp1", "--u", "-1"],
        ["coeff", "--geometry", "cp1", "--u", "x"],
        ["fit", "--geometry", "cp1", "--k", "4"],
        ["coeff", "--geometry", "cp1", "--q", "2"],
        ["coeff", "--geometry", "cp1", "--zero-tol", "0"],
        ["coeff", "--geometry", "cp1", "--manifest", "m.json"],
    ],
)
def test_usage_errors(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code == 2
    assert err.startswith("ERROR 2:") and out == ""


def test_validation_errors(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1, "points": [{"alphas": [1.0], "weight": -1}]}')
    code, _, err = call(capsys, "bounds", "--manifest", str(bad))
    assert code == 3 and err.startswith("ERROR 3:")
    code, _, err = call(capsys, "coeff", "--geometry", "sphere")
    assert code == 3
    code, _, err = call(capsys, "trace", "--manifest", str(tmp_path / "missing.json"))
    assert code == 3


def test_threads_env(capsys, monkeypatch):
    argv = ["sweep", "--geometry", "torus:d=1,-1,A=1", "--u", "0.1,0.5,1,5,50"]
    monkeypatch.setenv("CURVHEAT_THREADS", "1")
    _, serial, _ = call(capsys, *argv)
    monkeypatch.setenv("CURVHEAT_THREADS", "4")
    _, parallel, _ = call(capsys, *argv)
    assert serial == parallel
    monkeypatch.setenv("CURVHEAT_THREADS", "zero")
    code, _, err = call(capsys, *argv)
    assert code == 2


def test_output_is_deterministic_and_formatted(capsys, tmp_path):
    argv = ["trace", "--geometry", "cp1", "--p", "5,10", "--u", "0.5,1"]
    a = call(capsys, *argv)[1]
    b = call(capsys, *argv)[1]
    assert a == b
    header, *body = a.splitlines()
    assert header == "geometry,p,q,u,trace,truncation_bound,leading_term"
    assert len(body) == 2 * 2 * 2
    value = body[0].split(",")[4]
    assert len(value.replace(".", "").lstrip("0")) >= 16  # 17 significant digits
    out = tmp_path / "t.csv"
    assert run(argv + ["--out", str(out)]) == 0
    assert out.read_text() == a


def test_tree_format(capsys):
    code, out, _ = call(capsys, "bounds", "--geometry", "cp1", "--u", "1,50", "--format", "tree")
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 4 and doc["failures"] == []
    q0 = [r for r in doc["rows"] if r["q"] == 0 and r["u"] == 50.0][0]
    assert q0["weak_bound"] == pytest.approx(1.0) and q0["u_bound"] == pytest.approx(1.0, abs=1e-6)


def test_trace_spectrum_listing(capsys):
    code, out, _ = call(capsys, "trace", "--geometry", "torus:d=1,A=1", "--p", "2", "--q", "0", "--cutoff", "60")
    table = rows(out)
    assert code == 0
    assert [(float(r["lambda"]), int(r["multiplicity"])) for r in table] == [(0.0, 2), (8 * math.pi, 2), (16 * math.pi, 2)]


def test_manifest_commands(capsys, tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"n": 1, "points": [{"alphas": [1.0], "weight": 0.5}, {"alphas": [-2.0], "weight": 0.5}]}))
    code, out, _ = call(capsys, "bounds", "--manifest", str(path), "--u", "1")
    assert code == 0
    table = rows(out)
    assert float(table[0]["weak_bound"]) == pytest.approx(0.5 / (2 * math.pi))
    code, out, _ = call(capsys, "verify", "--manifest", str(path), "--u", "1")
    assert code == 0 and {r["suite"] for r in rows(out)} == {"phi0_identity"}
    code, _, err = call(capsys, "trace", "--manifest", str(path), "--u", "1")
    assert code == 3 and "ERROR 3:" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "curvheat", "coeff", "--geometry", "cp1", "--u", "1"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("geometry,q,u,")


def test_manifest_from_stdin(capsys, monkeypatch):
    doc = json.dumps({"n": 1, "points": [{"alphas": [6.283185307179586], "weight": 1.0}]})
    monkeypatch.setattr(sys, "stdin", io.StringIO(doc))
    code, out, _ = call(capsys, "bounds", "--manifest", "-", "--u", "1", "--q", "0")
    assert code == 0
    assert float(rows(out)[0]["weak_bound"]) == pytest.approx(1.0)
