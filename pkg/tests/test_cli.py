import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from realspace_qc import cli, pipeline
from realspace_qc.errors import ParameterError

HYDROGEN = {
    "molecule": {"unit": "bohr", "atoms": [{"Z": 1, "xyz": [0, 0, 0]}]},
    "grid": {"n_radial": 8, "alpha": 1.5, "angular": ["lebedev", 14]},
}


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run_cli(tmp_path, command, doc, *extra, out="out"):
    cfg = write_config(tmp_path, doc)
    out_dir = tmp_path / out
    code = cli.main([command, "--config", cfg, "--out", str(out_dir), *extra])
    return code, out_dir


def test_parser_lists_every_command():
    parser = cli.build_parser()
    text = parser.format_help()
    for cmd in cli.COMMANDS:
        assert cmd in text
    args = parser.parse_args(["lcu", "--config", "x.json", "--rule", "printed", "--threads", "2"])
    assert args.rule == "printed" and args.threads == 2


def test_solve_hydrogen(tmp_path):
    code, out = run_cli(tmp_path, "solve", HYDROGEN)
    assert code == 0
    report = json.loads((out / "solve.json").read_text())
    assert report["E_total"] == report["E_electronic"]
    assert -0.55 < report["E_total"] < -0.3
    assert report["N"] == 8 * 14 and report["dim"] == report["N"]
    trace = list(csv.reader((out / "davidson_trace.csv").open()))
    assert trace[0] == ["iter", "eigenvalue", "residual"]


def test_solve_adds_nuclear_repulsion(tmp_path):
    doc = {
        "molecule": {"atoms": [{"Z": 1, "xyz": [0, 0, 0]}, {"Z": 1, "xyz": [0, 0, 1.4]}]},
        "grid": {"n_radial": 4, "alpha": 1.0, "angular": ["lebedev", 6]},
    }
    code, out = run_cli(tmp_path, "solve", doc)
    assert code == 0
    rep = json.loads((out / "solve.json").read_text())
    assert rep["electrons"] == 2
    assert rep["E_total"] - rep["E_electronic"] == pytest.approx(1 / 1.4)


def test_outputs_are_deterministic(tmp_path):
    _, a = run_cli(tmp_path, "solve", HYDROGEN, out="a")
    _, b = run_cli(tmp_path, "solve", HYDROGEN, out="b")
    assert (a / "solve.json").read_bytes() == (b / "solve.json").read_bytes()
    assert (a / "davidson_trace.csv").read_bytes() == (b / "davidson_trace.csv").read_bytes()
    doc = dict(HYDROGEN, qcpe={"source": "random", "size": 8})
    _, c = run_cli(tmp_path, "qcpe", doc, "--seed", "3", out="c")
    _, d = run_cli(tmp_path, "qcpe", doc, "--seed", "3", out="d")
    assert (c / "qcpe.json").read_bytes() == (d / "qcpe.json").read_bytes()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = {"molecule": {"atoms": []}, "grid": {"n_radial": 4}}
    assert run_cli(tmp_path, "solve", bad)[0] == 2
    assert run_cli(tmp_path, "solve", dict(HYDROGEN, colour="red"))[0] == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["solve", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path)]) == 2
    assert cli.main(["solve", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_nonconvergence_exits_3_with_partial_report(tmp_path):
    doc = dict(HYDROGEN, solver={"max_iter": 1, "tol": 1e-15})
    code, out = run_cli(tmp_path, "solve", doc)
    assert code == 3
    rep = json.loads((out / "solve.json").read_text())
    assert rep["converged"] is False
    assert math.isfinite(rep["E_electronic"])


def test_console_script_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"molecule": {"atoms": []}, "grid": {"n_radial": 4}})
    proc = subprocess.run(
        [sys.executable, "-m", "realspace_qc.cli", "grid", "--config", cfg, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2


def test_grid_and_voronoi_stats(tmp_path):
    code, out = run_cli(tmp_path, "grid", HYDROGEN)
    assert code == 0
    assert len((out / "grid.txt").read_text().splitlines()) == 112
    code, out = run_cli(tmp_path, "voronoi-stats", HYDROGEN)
    assert code == 0
    stats = json.loads((out / "voronoi_stats.json").read_text())
    assert stats["volume_total"] == pytest.approx(stats["box_volume"], rel=1e-8)
    doc = json.loads((out / "voronoi.json").read_text())
    assert len(doc["volumes"]) == 112


def test_scan_convergence(tmp_path):
    doc = dict(HYDROGEN, scan={"n_radial": [4, 8], "reference_energy": -0.5})
    code, out = run_cli(tmp_path, "scan-convergence", doc)
    assert code == 0
    rows = list(csv.DictReader((out / "convergence.csv").open()))
    assert [int(r["N"]) for r in rows] == [56, 112]
    assert float(rows[1]["error"]) == pytest.approx(float(rows[1]["E"]) + 0.5)
    code, out = run_cli(tmp_path, "scan-convergence", HYDROGEN, "--n-radial", "6", out="single")
    assert code == 0
    assert len(list(csv.DictReader((out / "convergence.csv").open()))) == 1


def test_scan_dissociation(tmp_path):
    doc = {
        "molecule": {"unit": "angstrom", "atoms": [{"Z": 1, "xyz": [0, 0, 0]}, {"Z": 1, "xyz": [0, 0, 0.74]}]},
        "grid": {"n_radial": 4, "alpha": 1.0, "angular": ["lebedev", 6]},
    }
    code, out = run_cli(tmp_path, "scan-dissociation", doc, "--R", "0.74", "3.0")
    assert code == 0
    rows = list(csv.DictReader((out / "dissociation.csv").open()))
    assert [float(r["R"]) for r in rows] == [0.74, 3.0]
    assert run_cli(tmp_path, "scan-dissociation", doc, out="none")[0] == 2


def test_lcu_command(tmp_path):
    doc = {
        "molecule": {"atoms": [{"Z": 2, "xyz": [0, 0, 0]}]},
        "grid": {"n_radial": 1, "alpha": 1.0, "angular": ["lebedev", 6]},
        "jastrow": {"mu_ne": 1.0, "mu_ee": 1.0},
    }
    code, out = run_cli(tmp_path, "lcu", doc, "--validate")
    assert code == 0
    summary = json.loads((out / "lcu_summary.json").read_text())
    assert summary["N_physical"] == 6 and summary["n_ghost"] == 2
    assert summary["reconstruction_residual"] < 1e-10
    assert summary["lambda"] > 0
    rows = list(csv.reader((out / "lcu_coefficients.csv").open()))
    assert len(rows) - 1 == summary["n_strings"]
    code, _ = run_cli(tmp_path, "lcu", doc, "--rule", "printed", out="printed")
    assert code == 0


def test_qcpe_command_on_hamiltonian(tmp_path):
    doc = {
        "molecule": {"atoms": [{"Z": 2, "xyz": [0, 0, 0]}]},
        "grid": {"n_radial": 1, "alpha": 1.0, "angular": ["lebedev", 6]},
        "jastrow": {"mu_ee": 1.0},
        "qcpe": {"source": "hamiltonian"},
    }
    code, out = run_cli(tmp_path, "qcpe", doc, "--seed", "5")
    assert code == 0
    rep = json.loads((out / "qcpe.json").read_text())
    assert rep["dimension"] == 36 and rep["seed"] == 5
    assert rep["median_error"] <= rep["error_bound"]


def test_cusp_cut_command(tmp_path):
    doc = {
        "molecule": {"atoms": [{"Z": 2, "xyz": [0, 0, 0]}]},
        "grid": {"n_radial": 4, "alpha": 1.0, "angular": ["gauss_legendre", 3, 8]},
        "cusp": {"mu_ee": ["inf", 1.0], "radius": 0.5},
    }
    code, out = run_cli(tmp_path, "cusp-cut", doc)
    assert code == 0
    metrics = json.loads((out / "cusp_metrics.json").read_text())
    assert [m["mu_ee"] for m in metrics["metrics"]] == ["inf", 1.0]
    rows = list(csv.DictReader((out / "cusp_cut.csv").open()))
    assert len(rows) == 2 * 8
    # the ring is symmetric about the coalescence azimuth
    psi = np.array([float(r["psi"]) for r in rows[:8]])
    np.testing.assert_allclose(psi[1:], psi[1:][::-1], rtol=1e-5)
    lebedev = dict(doc, grid={"n_radial": 4, "angular": ["lebedev", 14]})
    assert run_cli(tmp_path, "cusp-cut", lebedev, out="bad")[0] == 2


def test_run_config_validation(tmp_path):
    with pytest.raises(ParameterError):
        pipeline.RunConfig.from_dict({"grid": {"n_radial": 4}})
    with pytest.raises(ParameterError):
        pipeline.RunConfig.from_dict({"molecule": HYDROGEN["molecule"]})
    with pytest.raises(ParameterError):
        pipeline.RunConfig.from_dict(dict(HYDROGEN, solver={"tolerance": 1}))
    with pytest.raises(ParameterError):
        pipeline.RunConfig.from_dict(dict(HYDROGEN, boundary="periodic"))
    mol_file = tmp_path / "mol.json"
    mol_file.write_text(json.dumps(HYDROGEN["molecule"]))
    cfg_path = write_config(tmp_path, {"molecule_file": "mol.json", "grid": HYDROGEN["grid"]})
    cfg = pipeline.RunConfig.from_json(cfg_path)
    assert cfg.molecule.natoms == 1 and cfg.electrons == 1


def test_excluded_coincident_cells(tmp_path):
    doc = {
        "molecule": {"atoms": [{"Z": 2, "xyz": [0, 0, 0]}]},
        "grid": {"n_radial": 2, "alpha": 1.0, "angular": ["lebedev", 6]},
        "c0": None,
    }
    code, out = run_cli(tmp_path, "solve", doc)
    assert code == 0
    e_excl = json.loads((out / "solve.json").read_text())["E_total"]
    # oracle: lowest eigenvalue of the bare operator restricted to m != p configurations
    cfg = pipeline.RunConfig.from_dict(dict(doc, c0=1.882))
    _, diagram = pipeline.build_grid(cfg)
    H = pipeline.build_operator(cfg, diagram).dense_matrix()
    n = diagram.n_cells
    keep = ~np.eye(n, dtype=bool).ravel()
    ref = np.linalg.eigvalsh(H[np.ix_(keep, keep)])[0]
    assert e_excl == pytest.approx(ref, abs=1e-5)
    assert run_cli(tmp_path, "solve", dict(doc, jastrow={"mu_ee": 1.0}), out="tc")[0] == 2
    assert run_cli(tmp_path, "solve", dict(doc, c0=-1.0), out="neg")[0] == 2
