import csv
import json

import numpy as np
import pytest

from maxsurf import cli, io
from maxsurf.eqmesh import build_mesh
from maxsurf.errors import ConfigError, InputError
from maxsurf.maxsolver import causal_gap
from maxsurf.surface_rep import embed_block, fuchsian_rep


@pytest.fixture(scope="module")
def rep():
    return embed_block(fuchsian_rep(2), 2)


@pytest.fixture
def rep_file(rep, tmp_path):
    path = tmp_path / "rep.json"
    io.save_rep(rep, path)
    return path


@pytest.fixture
def mesh_file(rep, tmp_path):
    path = tmp_path / "mesh.json"
    io.save_mesh(build_mesh(rep, refinement=1), path)
    return path


# ---------------------------------------------------------------- config


def test_config_roundtrip_and_defaults():
    cfg = io.parse_config({"command": "surface solve", "params": {"rep": "r.json", "refinement": 1}})
    assert cfg.get("refinement") == 1
    assert cfg.get("rng_seed") == 0
    assert cfg.get("tol") > 0
    again = io.parse_config(io.serialize_config(cfg))
    assert again == cfg
    assert io.Report.digest(again) == io.Report.digest(cfg)


def test_config_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"command": "invariants components", "params": {"n": 3, "genus": 2}}))
    assert io.parse_config(path).get("n") == 3


def test_env_tolerance(monkeypatch):
    monkeypatch.setenv("MAXSURF_TOL", "1e-6")
    cfg = io.parse_config({"command": "surface verify", "params": {"mesh": "m.json"}})
    assert cfg.get("tol") == 1e-6


@pytest.mark.parametrize(
    "data, where",
    [
        ({"command": "surface solve", "params": {"rep": "r", "bogus": 1}}, "params.bogus"),
        ({"command": "surface solve", "params": {"rep": "r", "refinement": -1}}, "params.refinement"),
        ({"command": "surface solve", "params": {"rep": "r", "refinement": 9}}, "params.refinement"),
        ({"command": "surface solve", "params": {"rep": "r", "seed": "flat"}}, "params.seed"),
        ({"command": "surface solve", "params": {}}, "params.rep"),
        ({"command": "geo classify", "params": {"x": [1, "a"], "y": [1]}}, "params.x"),
        ({"command": "nope"}, "command"),
        ({"command": "surface solve", "params": {"rep": "r"}, "extra": 1}, "top level"),
        ({"command": "surface solve", "params": {"rep": "r"}, "version": 7}, "version"),
    ],
)
def test_config_errors_name_the_field(data, where):
    with pytest.raises(ConfigError, match=where):
        io.parse_config(data)


def test_bad_config_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        io.parse_config(path)


# ----------------------------------------------------------- data files


def test_rep_and_mesh_roundtrip(rep, rep_file, mesh_file):
    back = io.load_rep(rep_file)
    for a, b in zip(back.gens, rep.gens):
        np.testing.assert_array_equal(a, b)
    mesh = io.load_mesh(mesh_file)
    np.testing.assert_array_equal(mesh.x, build_mesh(rep, refinement=1).x)


def test_malformed_mesh(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"x": [1, 2]}))
    with pytest.raises(InputError):
        io.load_mesh(path)


def test_ply_layout(rep, tmp_path):
    mesh = build_mesh(rep, refinement=1)
    path = tmp_path / "m.ply"
    io.write_ply(mesh, path)
    lines = path.read_text().splitlines()
    end = lines.index("end_header")
    n_v = int(next(l for l in lines if l.startswith("element vertex")).split()[-1])
    n_f = int(next(l for l in lines if l.startswith("element face")).split()[-1])
    assert n_v == len(mesh.positions()) and n_f == len(mesh.domain.triangles)
    assert len(lines) == end + 1 + n_v + n_f
    full = np.array([[float(t) for t in l.split()[2:]] for l in lines if l.startswith("comment x ")])
    np.testing.assert_allclose(full, mesh.positions(), rtol=1e-15)
    proj = np.array([[float(t) for t in l.split()] for l in lines[end + 1 : end + 1 + n_v]])
    assert np.all(np.linalg.norm(proj, axis=1) < 1.0)


def test_convergence_csv(tmp_path):
    path = tmp_path / "c.csv"
    io.write_convergence_csv([(1, 0.5, 12.0, 0.1), (2, 0.25, 12.5, 0.1)], path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["iter", "residual", "area", "min_gram_eig"]
    assert float(rows[2][1]) == 0.25


def test_unwritable_export(rep, tmp_path):
    mesh = build_mesh(rep, refinement=0)
    with pytest.raises(InputError):
        io.export_plot_data(mesh, "mesh", tmp_path / "missing" / "m.ply")


def test_landscape_max_matches_causal_gap(rep):
    s1 = build_mesh(rep, refinement=1)
    t = 0.35
    e4 = np.zeros(5)
    e4[3] = 1.0
    s2 = s1.copy(np.cos(t) * s1.x + np.sin(t) * e4)
    grid, pts = io.b_landscape(s1, s2, res=2, window=1)
    rec = causal_gap(s1, s2)
    assert grid.shape == (s1.x.shape[0], pts.shape[0])
    # the pointwise maximum sits at a vertex here, which the lattice contains
    assert grid.max() == pytest.approx(rec.B, abs=1e-6)
    assert grid.max() <= rec.B + 1e-9


# ------------------------------------------------------------------ CLI


def test_components_command(tmp_path):
    out = tmp_path / "r.json"
    code = cli.main(["invariants", "components", "--n", "2", "--genus", "2", "--report", str(out)])
    assert code == cli.EXIT_OK
    assert json.loads(out.read_text())["results"]["components"] == 35


def test_exit_codes_for_bad_input(tmp_path, capsys):
    assert cli.main(["surface", "solve", "r.json", "--refinement", "-1"]) == cli.EXIT_INPUT
    assert cli.main(["invariants", "components", "--bogus", "1"]) == cli.EXIT_INPUT
    assert cli.main([]) == cli.EXIT_INPUT
    bad = tmp_path / "rep.json"
    bad.write_text("[1, 2")
    assert cli.main(["rep", "check", str(bad), "--report", str(tmp_path / "o.json")]) == cli.EXIT_INPUT


def test_not_converged_exit_keeps_report(rep_file, tmp_path):
    rpt = tmp_path / "r.json"
    code = cli.main(
        ["surface", "solve", str(rep_file), "--refinement", "1", "--seed", "perturbed", "--max-iters", "1",
         "--out", str(tmp_path), "--report", str(rpt)]
    )
    assert code == cli.EXIT_NUMERIC
    data = json.loads(rpt.read_text())
    assert data["status"] == "not converged"
    assert data["results"]["converged"] is False


def test_solve_then_verify_and_gaussmap(rep_file, tmp_path):
    code = cli.main(["surface", "solve", str(rep_file), "--refinement", "1", "--seed", "perturbed",
                     "--rng-seed", "2", "--out", str(tmp_path), "--report", str(tmp_path / "s.json")])
    assert code == cli.EXIT_OK
    for suffix in (".ply", "_convergence.csv", "_mesh.json"):
        assert (tmp_path / f"surface{suffix}").exists()
    mesh = str(tmp_path / "surface_mesh.json")
    assert cli.main(["surface", "verify", mesh, "--report", str(tmp_path / "v.json")]) == cli.EXIT_OK
    assert cli.main(["surface", "gaussmap", mesh, "--report", str(tmp_path / "g.json")]) == cli.EXIT_OK
    g = json.loads((tmp_path / "g.json").read_text())
    assert g["defects"]["conformality"] <= 1e-3
    csv_out = tmp_path / "conv.csv"
    code = cli.main(["export", "--kind", "convergence", "--input", str(tmp_path / "s.json"), "--out", str(csv_out),
                     "--report", str(tmp_path / "e.json")])
    assert code == cli.EXIT_OK
    assert csv_out.read_text().startswith("iter,residual,area")


def test_config_flag(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "higgs verify", "params": {"g": 3, "n": 2}}))
    out = tmp_path / "r.json"
    assert cli.main(["--config", str(cfg), "--report", str(out)]) == cli.EXIT_OK
    assert json.loads(out.read_text())["results"]["chain"]["verified"]


def test_reports_are_deterministic(mesh_file):
    cfg = io.parse_config({"command": "surface gaussmap", "params": {"mesh": str(mesh_file)}})
    a = cli.run(cfg)[1].canonical()
    b = cli.run(cfg)[1].canonical()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_twist_command(rep_file, tmp_path):
    out = tmp_path / "tw.json"
    signs = json.dumps([[1, 1], [-1, -1], [1, 1], [1, 1]])
    code = cli.main(["rep", "twist", "--rep", str(rep_file), "--signs", signs, "--out", str(out),
                     "--report", str(tmp_path / "r.json")])
    assert code == cli.EXIT_OK
    assert out.exists()
