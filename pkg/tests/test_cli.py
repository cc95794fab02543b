import csv
import json
import subprocess
import sys

import pytest

from risbackscatter import cli, validation
from risbackscatter.specfun import ConvergenceError, QuadratureResult


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_rate_csv_argmax(tmp_path):
    out = tmp_path / "rate.csv"
    assert cli.main(["rate", "--n", "9", "--l-min", "10", "--l-max", "60", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 51
    best = max(rows, key=lambda r: float(r["rate_bits_per_pri"]))
    assert best["L"] == "21" and best["is_max"] == "1" and best["bits_per_frame"] == "17"
    assert float(best["rate_bits_per_pri"]) == pytest.approx(0.8265599127486848, abs=0)


def test_manifest_contents(tmp_path):
    out = tmp_path / "rate.csv"
    cli.main(["rate", "--seed", "99", "--out", str(out)])
    man = json.loads((tmp_path / "rate.csv.manifest.json").read_text())
    assert man["command"] == "rate" and man["seed"] == 99
    assert man["config"]["seed"] == 99 and len(man["config_sha256"]) == 64
    assert set(man["versions"]) == {"risbackscatter", "numpy", "scipy", "python"}


def test_single_frame_high_snr(tmp_path, capsys):
    out = tmp_path / "frame.csv"
    assert cli.main(["single-frame", "--message", "0x00000", "--snr-db", "100", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "result: correct" in text
    rows = read_rows(out)
    assert len(rows) == 20
    assert [r["transmitted"] for r in rows] == [r["detected"] for r in rows]
    assert sum(int(r["transmitted"]) for r in rows) == 9
    man = json.loads((tmp_path / "frame.csv.manifest.json").read_text())
    assert man["correct"] is True


def test_single_frame_rejects_oversized_message(tmp_path):
    assert cli.main(["single-frame", "--message", "0x20000", "--out", str(tmp_path / "f.csv")]) == 1
    assert cli.main(["single-frame", "--message", "zz", "--out", str(tmp_path / "f.csv")]) == 1


def test_pe_vs_l_is_byte_reproducible(tmp_path):
    args = ["pe-vs-l", "--seed", "7", "--trials", "300", "--l-values", "15,21", "--snr-db", "0"]
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert cli.main(args + ["--threads", "3", "--out", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    rows = read_rows(a)
    assert list(rows[0]) == cli.SWEEP_HEADER
    assert [r["sweep_var"] for r in rows] == ["15", "21"]


def test_rerun_from_manifest(tmp_path):
    first = tmp_path / "s.csv"
    args = ["pe-vs-spread", "--seed", "3", "--trials", "200", "--spreads", "5,10",
            "--snr-db=-5,0", "--overlay", "--draws", "10"]
    assert cli.main(args + ["--out", str(first)]) == 0
    man = json.loads((tmp_path / "s.csv.manifest.json").read_text())
    argv = [a for a in man["argv"]]
    i = argv.index("--out")
    argv[i + 1] = str(tmp_path / "again.csv")
    argv += ["--config", str(tmp_path / "s.csv.manifest.json")]
    assert cli.main(argv) == 0
    assert (tmp_path / "again.csv").read_bytes() == first.read_bytes()
    assert {r["method"] for r in read_rows(first)} == {"monte-carlo", "semi-analytic"}


def test_beampattern_export(tmp_path):
    out = tmp_path / "bp.csv"
    assert cli.main(["beampattern", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 37 * 13
    peak = max(rows, key=lambda r: float(r["beampattern"]))
    assert (float(peak["az_deg"]), float(peak["el_deg"])) == (45.0, 0.0)
    assert float(peak["beampattern"]) == pytest.approx(118125, rel=1e-12)


def test_validate_passes(tmp_path):
    out = tmp_path / "v.csv"
    assert cli.main(["validate", "--out", str(out)]) == 0
    assert all(r["passed"] == "1" for r in read_rows(out))


def test_validate_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setitem(validation.CHECKS, "always_fails", lambda cfg: (False, "forced"))
    assert cli.main(["validate", "--out", str(tmp_path / "v.csv")]) == 4


def test_usage_errors(tmp_path):
    assert cli.main([]) == 1
    assert cli.main(["rate"]) == 1
    assert cli.main(["rate", "--bogus", "--out", str(tmp_path / "x")]) == 1
    assert cli.main(["rate", "--threads", "0", "--out", str(tmp_path / "x")]) == 1
    assert cli.main(["launch", "--out", str(tmp_path / "x")]) == 1


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("codeword_length = 5\n")
    assert cli.main(["rate", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    assert cli.main(["rate", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "x.csv")]) == 2
    assert cli.main(["rate", "--seed", "-4", "--out", str(tmp_path / "x.csv")]) == 2
    assert not (tmp_path / "x.csv").exists()


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(args, config):
        raise ConvergenceError("no convergence", QuadratureResult(float("nan"), 1.0, 0))
    monkeypatch.setitem(cli.COMMANDS, "rate", boom)
    assert cli.main(["rate", "--out", str(tmp_path / "x.csv")]) == 3


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.csv"
    proc = subprocess.run([sys.executable, "-m", "risbackscatter", "rate", "--l-max", "25",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "L=21" in proc.stdout and out.exists()
