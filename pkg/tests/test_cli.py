import csv
import io
import json
import math
import subprocess
import sys

import pytest

from geodesic_lab.cli import run

TINY = "# tiny test table\n9.5336952613\n12.1730083246\n13.7797513519\n"


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("GEODESIC_LAB_DATA", raising=False)
    return tmp_path


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.txt"
    path.write_text(TINY)
    return path


def call(argv, capsys):
    code = run(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_psi(capsys):
    code, out, _ = call(["psi", "--x", "7"], capsys)
    assert code == 0
    (row,) = rows(out)
    assert float(row["psi"]) == pytest.approx(2 * math.log((3 + math.sqrt(5)) / 2), rel=1e-15)
    assert row["breakpoints"] == "1"


def test_psi_dump_spectrum(capsys, isolated):
    code, _, _ = call(["psi", "--x", "100", "--dump-spectrum", "s.csv"], capsys)
    assert code == 0
    dumped = (isolated / "s.csv").read_text().splitlines()
    assert dumped[0] == "trace,log_norm,jump"
    assert dumped[1].startswith("3,")


def test_mean_square_psi(capsys):
    code, out, _ = call(["mean-square", "psi", "--a", "3"], capsys)
    assert code == 0
    (row,) = rows(out)
    assert float(row["value"]) == pytest.approx(21.0, rel=1e-15)
    assert row["method"] == "PIECEWISE_EXACT"


def test_mean_square_r_and_json(capsys, tiny):
    code, out, _ = call(["mean-square", "r", "--a", "100", "--t", "10", "--spectrum", str(tiny),
                         "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["rows"][0]["value"] == pytest.approx(1.0, rel=1e-14)
    assert doc["rows"][0]["eta"] is None


def test_r_sum(capsys, tiny):
    code, out, _ = call(["r-sum", "--x", "1000", "--t", "13", "--spectrum", str(tiny)], capsys)
    assert code == 0
    (row,) = rows(out)
    expected = sum(complex(math.cos(t * math.log(1000)), math.sin(t * math.log(1000)))
                   for t in (9.5336952613, 12.1730083246))
    assert row["count"] == "2"
    assert float(row["re"]) == pytest.approx(expected.real, abs=1e-12)
    assert float(row["im"]) == pytest.approx(expected.imag, abs=1e-12)


def test_r_sum_beyond_coverage_is_compute_error(capsys, tiny):
    code, out, err = call(["r-sum", "--x", "1000", "--t", "50", "--spectrum", str(tiny)], capsys)
    assert code == 1
    assert out.startswith("#error ") and "truncated" in out
    assert "truncated" in err


def test_json_error_keeps_stdout_clean(capsys, tiny):
    code, out, _ = call(["r-sum", "--x", "1000", "--t", "50", "--spectrum", str(tiny), "--format", "json"],
                        capsys)
    assert code == 1 and out == ""


@pytest.mark.parametrize("argv", [
    ["psi"],
    ["psi", "--x", "abc"],
    ["mean-square", "short", "--a", "10"],
    ["mean-square", "short", "--a", "10", "--eta", "0.7"],
    ["explicit", "--x", "1e6", "--t", "50"],
    ["psi", "--x", "7", "--threads", "0"],
    ["psi", "--x", "7", "--config", "missing.toml"],
    ["r-sum", "--x", "100", "--t", "5", "--spectrum", "missing.txt"],
    ["nonsense"],
])
def test_validation_exit_code(capsys, argv, tiny):
    argv = [str(tiny) if a == "TINY" else a for a in argv]
    code, _, err = call(argv, capsys)
    assert code == 2
    assert err


def test_explicit_force(capsys, tiny):
    code, out, _ = call(["explicit", "--x", "5000", "--t", "2.5", "--force", "--spectrum", str(tiny)], capsys)
    assert code == 0
    (row,) = rows(out)
    assert float(row["psi_spectral"]) == 5000.0
    assert "# forced" in out


def test_partial_sum_check(capsys, tiny):
    code, out, _ = call(["partial-sum-check", "--x", "1000", "--t", "13.7", "--spectrum", str(tiny)], capsys)
    assert code == 0
    assert float(rows(out)[0]["discrepancy"]) <= 1e-10


def test_spectrum_validate(capsys, tiny):
    code, out, _ = call(["spectrum-validate", "--file", str(tiny)], capsys)
    assert code == 0
    assert "# source: tiny test table" in out
    assert len(rows(out)) == 50


def test_spectrum_validate_malformed(capsys, isolated):
    bad = isolated / "bad.txt"
    bad.write_text("9.5\nzzz\n")
    code, _, err = call(["spectrum-validate", "--file", str(bad)], capsys)
    assert code == 2 and "line 2" in err


def test_sweep_t1_output(capsys):
    code, out, _ = call(["sweep", "--theorem", "1", "--a-min", "100", "--a-max", "1000", "--points", "4"], capsys)
    assert code == 0
    table = rows(out)
    assert [r["theorem"] for r in table] == ["T1"] * 4
    assert float(table[0]["A"]) == 100.0 and float(table[-1]["A"]) == pytest.approx(1000.0, rel=1e-15)
    assert all(float(r["ratio"]) == pytest.approx(float(r["value"]) / float(r["envelope"]), rel=1e-12)
               for r in table)
    assert "# fit T1: slope=" in out


def test_sweep_t2_json_fit(capsys, tiny):
    code, out, _ = call(["sweep", "--theorem", "2", "--a-min", "1e3", "--a-max", "1e5", "--points", "3",
                         "--t", "10", "tmax", "--spectrum", str(tiny), "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert len(doc["rows"]) == 6
    assert set(doc["fit"]) == {"T2 T=10", "T2 T=13.7797513519"}
    assert doc["fit"]["T2 T=10"]["slope"] == pytest.approx(0.0, abs=1e-9)


def test_sweep_t3_theorem_rule_empty_at_small_a(capsys):
    code, out, _ = call(["sweep", "--theorem", "3", "--a-min", "1e3", "--a-max", "1e4", "--points", "2"], capsys)
    assert code == 0
    assert rows(out) == []
    assert "empty" in out


def test_sweep_row_errors_exit_one(capsys, tiny):
    code, out, _ = call(["sweep", "--theorem", "2", "--a-min", "1e3", "--a-max", "1e4", "--points", "2",
                         "--t", "10", "99", "--spectrum", str(tiny)], capsys)
    assert code == 1
    assert len(rows(out)) == 2
    assert out.count("# error row") == 2


def test_config_file_and_precedence(capsys, isolated, tiny, monkeypatch):
    (isolated / "geodesic-lab.toml").write_text(f'spectrum_path = "{tiny}"\nout_format = json\n')
    code, out, _ = call(["r-sum", "--x", "100", "--t", "10"], capsys)
    assert code == 0 and json.loads(out)["rows"][0]["count"] == 1
    code, out, _ = call(["r-sum", "--x", "100", "--t", "10", "--format", "csv"], capsys)
    assert code == 0 and out.startswith("X,T,count")
    # the config file beats the environment
    other = isolated / "envdir"
    other.mkdir()
    (other / "maass_pslz.txt").write_text("11.0\n")
    monkeypatch.setenv("GEODESIC_LAB_DATA", str(other))
    code, out, _ = call(["r-sum", "--x", "100", "--t", "10"], capsys)
    assert json.loads(out)["rows"][0]["count"] == 1


def test_env_overrides_default(capsys, isolated, monkeypatch):
    other = isolated / "envdir"
    other.mkdir()
    (other / "maass_pslz.txt").write_text("# coverage: 20\n5.0\n6.0\n")
    monkeypatch.setenv("GEODESIC_LAB_DATA", str(other))
    code, out, _ = call(["r-sum", "--x", "100", "--t", "10"], capsys)
    assert code == 0 and rows(out)[0]["count"] == "2"


def test_bad_config_key(capsys, isolated):
    (isolated / "geodesic-lab.toml").write_text("colour = red\n")
    code, _, err = call(["psi", "--x", "7"], capsys)
    assert code == 2 and "unknown key" in err


def test_out_file(capsys, isolated):
    code, out, _ = call(["psi", "--x", "50", "--out", "r.csv"], capsys)
    assert code == 0 and out == ""
    assert (isolated / "r.csv").read_text().startswith("X,psi,breakpoints\n")


def test_threads_do_not_change_output(capsys):
    argv = ["sweep", "--theorem", "1", "--a-min", "1e3", "--a-max", "3e4", "--points", "5"]
    _, one, _ = call(argv + ["--threads", "1"], capsys)
    _, two, _ = call(argv + ["--threads", "2"], capsys)
    _, auto, _ = call(argv + ["--threads", "AUTO"], capsys)
    assert one == two == auto


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "geodesic_lab", "psi", "--x", "7"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert proc.stdout.startswith("X,psi,breakpoints\n7,")
