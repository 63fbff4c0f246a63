import csv
import json
import subprocess
import sys

from nogrowth.cli import main

SMALL = ["--mode", "I", "--levels", "3,7,11", "--depth", "12", "--seed", "1",
         "--cut-order-pairs", "10", "--witness-roots", "1", "--profile-roots", "3",
         "--profile-radius", "5"]


def test_build_and_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["build", *SMALL, "--out", str(out), "--export-edges", "true"]) == 0
    assert (out / "edges.txt").stat().st_size > 0
    m = json.loads((out / "manifest.json").read_text())
    assert not m["failed"] and m["seed"] == 1
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert m["content_hash"] in text and "pass" in text


def test_config_file_and_env(tmp_path, monkeypatch):
    cfg = tmp_path / "c.txt"
    cfg.write_text("mode = I\nlevels = 3,7,11\ndepth = 12\nseed = 1\nchecks = structure\n")
    monkeypatch.setenv("NGL_SEED", "5")
    assert main(["build", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 5
    assert main(["build", "--config", str(cfg), "--seed", "6", "--out", str(tmp_path / "b")]) == 0
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["seed"] == 6


def test_bad_config_exits_2(tmp_path, capsys):
    assert main(["build", "--mode", "J", "--epsilon", "1/12", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_measure(tmp_path, capsys):
    assert main(["measure", *SMALL, "--out", str(tmp_path), "--window-hi", "5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("upper") and lines[1].startswith("lower")
    assert (tmp_path / "profiles.csv").exists()


def test_witness(capsys):
    assert main(["witness", *SMALL, "--root", "g:0/000000000011", "--m", "1"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["m"] == 1 and rec["cluster_size"] > 0
    assert main(["witness", *SMALL, "--root", "g:0/000000000011", "--m", "0", "--kind", "upper"]) in (0, 1)


def test_mtp(capsys):
    assert main(["mtp", "--ensemble", "canopy", "--transport", "parent", "--samples", "2000"]) == 0
    assert main(["mtp", "--ensemble", "control", "--transport", "parent", "--samples", "500"]) == 1
    assert main(["mtp", "--ensemble", "graph", *SMALL, "--transport", "cut-edges",
                 "--samples", "1000"]) == 0
    out = capsys.readouterr().out
    assert out.count("pass") == 2 and out.count("fail") == 1


def test_girth_bench(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["girth-bench", "--n", "64", "--d", "3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert rows[0]["n"] == "64" and int(rows[0]["achieved"]) >= int(rows[0]["target"])


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "nogrowth", "report", str(tmp_path / "missing")],
                       capture_output=True, text=True)
    assert r.returncode != 0
    h = subprocess.run([sys.executable, "-m", "nogrowth", "--help"], capture_output=True, text=True)
    for cmd in ("build", "measure", "witness", "mtp", "girth-bench", "report"):
        assert cmd in h.stdout


def test_witness_bad_address(capsys):
    assert main(["witness", *SMALL, "--root", "0:011"]) == 2
    assert "cannot parse" in capsys.readouterr().err
