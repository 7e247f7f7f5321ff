import csv
import json

import numpy as np
import pytest

from monoped_codesign import codesign as cd
from monoped_codesign.cli import main


@pytest.fixture(scope="module")
def out(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["--out", str(d), "stage1"]) == 0
    return d


def _csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_stage1_files(out, catalog, capsys):
    for m in catalog:
        data = json.loads((out / "maps" / f"motor_{m.id}.json").read_text())
        entries = data["entries"] if isinstance(data, dict) else data
        assert 0 < len(entries) <= 311
        assert (out / "maps" / f"motor_{m.id}.csv").exists()


def test_stage1_summary_and_rerun(out, tmp_path, motor, capsys):
    u8 = motor("U8")
    assert main(["stage1", "--out", str(tmp_path), "--motor", str(u8.id)]) == 0
    line = capsys.readouterr().out.strip()
    maxima = {}
    for part in line.split("; ")[1].split(", "):
        t, rng = part.split()
        maxima[t] = float(rng.split("-")[1])
    assert maxima["SSPG"] < maxima["CPG"] < maxima["WPG"]
    for suffix in ("json", "csv"):
        name = f"motor_{u8.id}.{suffix}"
        assert (tmp_path / "maps" / name).read_bytes() == (out / "maps" / name).read_bytes()


def test_stage1_unknown_motor(tmp_path):
    assert main(["--out", str(tmp_path), "stage1", "--motor", "99"]) == 1


def test_simulate_nominal(out, capsys):
    assert main(["--out", str(out), "simulate"]) == 0
    printed = capsys.readouterr().out
    assert "status=completed" in printed
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["status"] == "completed" and metrics["liftoff_time"] > 0
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert len(rows) == metrics["steps"] + 1


def test_simulate_no_stiffness(out, tmp_path, capsys):
    # no leg spring or damper, angle target at the upright start: nothing pushes off
    design = {**cd.table_row(cd.Evaluation(cd.NOMINAL, None, 0.0)), "K": 0.0, "C": 0.0, "alpha0": 0.0}
    path = tmp_path / "design.json"
    path.write_text(json.dumps(design))
    work = tmp_path / "run"
    (work / "maps").mkdir(parents=True)
    for f in (out / "maps").iterdir():
        (work / "maps" / f.name).write_bytes(f.read_bytes())
    assert main(["--out", str(work), "simulate", "--design", str(path)]) == 0
    assert "status=no_liftoff" in capsys.readouterr().out
    metrics = json.loads((work / "metrics.json").read_text())
    assert metrics["status"] == "no_liftoff"
    assert len((work / "trajectory.csv").read_text().splitlines()) == metrics["steps"] + 1


def test_simulate_bad_design(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"l1": 0.3}))
    assert main(["--out", str(tmp_path), "simulate", "--design", str(path)]) == 1
    assert main(["--out", str(tmp_path), "simulate", "--design", str(tmp_path / "missing.json")]) == 1


def test_optimize_and_report(out, capsys):
    args = ["--out", str(out), "optimize", "--case", "b", "--seeds", "2", "--generations", "2"]
    assert main(args) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("B")
    rep = json.loads((out / "report_b.json").read_text())
    assert len(rep["runs"]) == 2 and [r["seed"] for r in rep["runs"]] == [0, 1]
    assert set(cd.ROW_COLUMNS) <= set(rep["best"]["row"])
    assert rep["best"]["cost"] == min(r["cost"] for r in rep["runs"])
    first = (out / "report_b.json").read_bytes()
    assert main(args) == 0
    assert (out / "report_b.json").read_bytes() == first

    assert main(["--out", str(out), "report"]) == 0
    plots = out / "plots"
    mass = _csv(plots / "mass_vs_ratio.csv")
    assert {"ratio", "type", "mass_kg"} <= set(mass[0])
    eff = _csv(plots / "efficiency_vs_ratio.csv")
    r = np.array([float(x["ratio"]) for x in eff])
    e = np.array([float(x["efficiency"]) for x in eff])
    assert np.polyfit(r, e, 1)[0] < 0
    assert (plots / "trajectory_b.csv").exists()


def test_optimize_unknown_case(out):
    assert main(["--out", str(out), "optimize", "--case", "z", "--generations", "1"]) == 1


def test_report_empty_dir(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "report"]) == 1
    err = capsys.readouterr().err
    assert "motor_1.json" in err and "report_<case>.json" in err


def test_bad_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"stage2": {"bogus": 1}}')
    assert main(["--config", str(bad), "report"]) == 1
    bad.write_text("{not json")
    assert main(["--config", str(bad), "report"]) == 1
    bad.write_text('{"extra": 1}')
    assert main(["--config", str(bad), "report"]) == 1
    assert main(["--config", str(tmp_path / "none.json"), "report"]) == 1
    bad.write_text('{"cma": {"seeds": []}}')
    assert main(["--config", str(bad), "report"]) == 1


def test_config_file_relative_catalog(tmp_path, out):
    from monoped_codesign.motors import default_catalog_path
    (tmp_path / "cat.json").write_bytes(default_catalog_path().read_bytes())
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"motor_catalog": "cat.json", "output_dir": str(out)}))
    assert main(["--config", str(cfg), "report"]) == 0
