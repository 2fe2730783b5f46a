import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from entropyflow import read_mesh
from entropyflow.cli import ROW_COLUMNS, main, read_config


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def report(text):
    return json.loads(text)


def test_generate_round_trip(tmp_path, capsys):
    path = tmp_path / "s.off"
    code, out, _ = run(capsys, "generate", "sphere:r=1,level=2", path)
    assert code == 0
    doc = report(out)
    assert doc["report"]["euler_characteristic"] == 2
    assert doc["report"]["vertices"] == 162
    assert read_mesh(path).n_faces == doc["report"]["faces"]
    assert len(doc["provenance"]["mesh_sha256"][0]) == 64


@pytest.mark.parametrize("argv", [
    ["generate", "blob:r=1", "x.off"],
    ["generate", "sphere:r=-1", "x.off"],
    ["entropy", "does_not_exist.off"],
    ["bonnesen", "missing.csv"],
    ["entropy"],
    ["verify", "no-such-suite"],
    ["frobnicate"],
])
def test_bad_input_exits_2(tmp_path, monkeypatch, capsys, argv):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        sys.exit(main(argv))
    assert exc.value.code == 2


def test_entropy_with_oracle(capsys):
    code, out, _ = run(capsys, "entropy", "sphere:r=1,level=3", "--oracle", "--grid-starts", "2")
    assert code == 0
    rep = report(out)["report"]
    assert rep["value"] == pytest.approx(4 / np.e, abs=5e-3)
    assert abs(rep["oracle_gap"]) <= 1e-3


def test_output_is_deterministic_apart_from_metadata(tmp_path, capsys):
    docs = []
    for name in ("a.json", "b.json"):
        code, _, _ = run(capsys, "entropy", "ellipsoid:a=1.5,b=1,c=1,level=2", "--out", tmp_path / name)
        assert code == 0
        doc = json.loads((tmp_path / name).read_text())
        doc.pop("metadata")
        doc["provenance"]["config"].pop("out")
        docs.append(doc)
    assert docs[0] == docs[1]


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# entropy defaults\ngrid-starts = 1\nmax_iter = 50\n")
    assert read_config(cfg) == {"grid_starts": "1", "max_iter": "50"}
    code, out, _ = run(capsys, "entropy", "sphere:r=1,level=2", "--config", cfg)
    assert code == 0
    assert report(out)["provenance"]["config"]["grid_starts"] == 1
    cfg.write_text("no_such_option = 3\n")
    assert run(capsys, "entropy", "sphere:r=1,level=2", "--config", cfg)[0] == 2
    cfg.write_text("grid-starts = many\n")
    assert run(capsys, "entropy", "sphere:r=1,level=2", "--config", cfg)[0] == 2


def test_bonnesen_command(tmp_path, capsys):
    path = tmp_path / "square.csv"
    u = np.linspace(-1, 1, 33)[:-1]
    pts = np.vstack([np.c_[u, -np.ones_like(u)], np.c_[np.ones_like(u), u],
                     np.c_[-u, np.ones_like(u)], np.c_[-np.ones_like(u), -u]])
    np.savetxt(path, pts, delimiter=",", header="x,y", comments="")
    code, out, _ = run(capsys, "bonnesen", path)
    assert code == 0
    rep = report(out)["report"]
    assert rep["holds"] and rep["rhs"] == pytest.approx(64 - 16 * np.pi)
    bow = tmp_path / "bow.csv"
    np.savetxt(bow, [[0, 0], [1, 1], [1, 0], [0, 1]], delimiter=",")
    assert run(capsys, "bonnesen", bow)[0] == 2


def test_verify_suite(capsys):
    code, out, err = run(capsys, "verify", "lambda-table")
    assert code == 0
    assert report(out)["report"]["passed"]
    assert "PASS" in err


def test_rigidity_sweep(tmp_path, capsys):
    out_dir = tmp_path / "sweep"
    code, out, _ = run(capsys, "rigidity", "--family", "ellipsoid", "--eps", "0.1,0.3",
                       "--level", "2", "--out-dir", out_dir)
    assert code == 0
    with open(out_dir / "rigidity.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == ROW_COLUMNS
    assert [float(r["eps"]) for r in rows] == [0.1, 0.3]
    assert float(rows[1]["delta"]) > float(rows[0]["delta"])
    summary = json.loads((out_dir / "rigidity.json").read_text())["report"]
    assert summary["max_ratio"] == pytest.approx(max(float(r["ratio"]) for r in rows))
    assert len(list((out_dir / "entries").glob("entry_*.json"))) == 2
    assert run(capsys, "rigidity", "--template", "sphere:r={bogus}", "--level", "2",
               "--out-dir", out_dir)[0] == 2


def test_small_flow(tmp_path, capsys):
    out_dir = tmp_path / "flow"
    code, out, _ = run(capsys, "flow", "sphere:r=1,level=2", "--horizon", "0.05",
                       "--entropy-value", "1.4715", "--out-dir", out_dir)
    assert code == 0
    rep = report(out)["report"]
    assert rep["final_time"] == pytest.approx(0.05, abs=1e-9)
    assert (out_dir / "manifest.json").exists()
    assert (out_dir / "curvature_monitor.csv").exists()
    assert (out_dir / "report.json").exists()


def test_axisym_flow(tmp_path, capsys):
    code, out, _ = run(capsys, "flow", "sphere:r=2", "--axisym", "--nodes", "50", "--horizon", "0.5",
                       "--entropy-value", "1.4715", "--out-dir", tmp_path / "ax")
    assert code == 0
    assert report(out)["report"]["final_time"] == pytest.approx(0.5, abs=1e-9)


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "entropyflow", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "entropyflow" in proc.stdout
