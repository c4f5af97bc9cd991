import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from bohmarrival.cli import main
from bohmarrival.io import read_csv

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = sorted((ROOT / "docs" / "scenarios").glob("*.json"))
BAD_SPIN = ROOT / "tests" / "data" / "bad_spin.json"


def run(scenario, out, *extra):
    return main(["run", "--scenario", str(scenario), "--out-dir", str(out), "--threads", "2", *extra])


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@pytest.mark.parametrize("scenario", SCENARIOS, ids=[p.stem for p in SCENARIOS])
def test_shipped_scenarios_run(scenario, tmp_path, capsys):
    assert run(scenario, tmp_path) == 0
    manifest = json.loads((tmp_path / "run_manifest.json").read_text())
    assert manifest["outputs"]
    for entry in manifest["outputs"]:
        assert digest(tmp_path / entry["path"]) == entry["sha256"]
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert json.loads(line)["command"] == manifest["command"]


def test_backflow_map_outputs(tmp_path, capsys):
    assert run(ROOT / "docs/scenarios/backflow_map.json", tmp_path) == 0
    grid = read_csv(tmp_path / "backflow_map.csv")
    assert list(grid) == ["x", "z", "re_psi", "j_x", "j_z"]
    assert len(grid["x"]) == 81 * 81
    centre = (np.abs(grid["x"]) < 1e-12) & (np.abs(grid["z"]) < 1e-12)
    assert grid["j_z"][centre][0] == pytest.approx(-1.18524, abs=1e-4)
    summary = json.loads((tmp_path / "run_manifest.json").read_text())["summary"]
    assert summary["k_eff_ratio"] == pytest.approx(1.11, abs=0.02)


def test_pml_outputs(tmp_path, capsys):
    assert run(ROOT / "docs/scenarios/pml_layer.json", tmp_path) == 0
    names = {p.name for p in tmp_path.glob("*.csv")}
    assert names
    for name in names:
        data = read_csv(tmp_path / name)
        assert all(np.all(np.isfinite(v)) for v in data.values() if v.dtype.kind == "f")


def test_reruns_are_byte_identical(tmp_path, capsys):
    scen = ROOT / "docs/scenarios/gaussian_arrivals.json"
    assert run(scen, tmp_path / "a") == 0
    assert main(["run", "--scenario", str(scen), "--out-dir", str(tmp_path / "b"), "--threads", "1"]) == 0
    for p in (tmp_path / "a").glob("*.csv"):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_seed_override_changes_sampling(tmp_path, capsys):
    scen = ROOT / "docs/scenarios/gaussian_arrivals.json"
    assert run(scen, tmp_path / "a", "--seed-override", "1") == 0
    assert run(scen, tmp_path / "b", "--seed-override", "2") == 0
    m = json.loads((tmp_path / "b" / "run_manifest.json").read_text())
    assert m["seed"] == 2 and m["seed_override"] == 2
    csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert any((tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes() for n in csvs)


def test_empty_file_is_a_schema_error(tmp_path, capsys):
    p = tmp_path / "empty.json"
    p.write_text("")
    assert run(p, tmp_path / "out") == 2
    assert main(["validate", "--scenario", str(p)]) == 2


def test_schema_error_names_the_field(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"schema_version": "1.0", "command": "pml", "detector": {"type": "pml", "chi0": "x", "d": 2, "a": 1}}))
    assert main(["validate", "--scenario", str(p)]) == 2
    report = json.loads(capsys.readouterr().out)
    assert not report["schema_ok"]
    assert "detector.chi0" in report["violations"][0]


def test_non_unit_spin_is_a_precondition_violation(tmp_path, capsys):
    assert main(["validate", "--scenario", str(BAD_SPIN)]) == 4
    report = json.loads(capsys.readouterr().out)
    assert report["schema_ok"]
    assert any(v.startswith("field.spin") and "unit length" in v for v in report["violations"])
    assert any("params.n" in w for w in report["warnings"])
    assert run(BAD_SPIN, tmp_path / "out") == 4
    assert not (tmp_path / "out" / "run_manifest.json").exists()


def test_validate_clean_scenario(capsys):
    assert main(["validate", "--scenario", str(ROOT / "docs/scenarios/slab.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["violations"] == [] and report["schema_ok"]
