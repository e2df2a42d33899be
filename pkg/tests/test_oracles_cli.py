import json

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from mapfe.bezier import read_mesh, structured_hex_mesh
from mapfe.cli import main
from mapfe.config import ConfigError, load_config, problem_from_dict
from mapfe.errors import LockingStretch
from mapfe.oracles import (
    cubic_stretch_oracle,
    gent_ascending_limit,
    gent_lock_stretch,
    gent_potential_oracle,
    gent_stretch_from_potential,
)
from mapfe.scenarios import SCENARIOS, Scenario, load_manifest, quadratic_ratio_ok
from mapfe.solver import Model, read_probe_csv, run_schedule
from mapfe.vtk import read_vtk_points, write_vtk

# --- oracles ------------------------------------------------------------------

# positive roots of lambda^3 - k lambda^2 - 1 from a 30-digit root finder
CUBIC_ROOTS = [(3.0, 3.1038034027355366), (-3.0, 0.5320888862379561), (0.0, 1.0)]


@pytest.mark.parametrize("k, lam", CUBIC_ROOTS)
def test_cubic_examples(k, lam):
    assert cubic_stretch_oracle(k) == pytest.approx(lam, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5.0, 5.0))
def test_cubic_root_is_positive_root(k):
    lam = cubic_stretch_oracle(k)
    assert lam > 0
    assert abs(lam**3 - k * lam**2 - 1.0) <= 1e-12 * max(1.0, lam**3)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5.0, 5.0), st.floats(1e-3, 1.0))
def test_cubic_root_increases_with_k(k, dk):
    assert cubic_stretch_oracle(k + dk) > cubic_stretch_oracle(k)


def test_gent_example():
    # lambda = 1.2, Im = 5: x = 2.88 + 1.2^-4 - 3 = 0.3622530864...,
    # sqrt((1 - 1.2^-6) / (1.44 (1 - x / 5))) = 0.70565816...
    assert gent_potential_oracle(1.2, 5.0) == pytest.approx(0.7056581602493119, rel=1e-14)
    assert gent_potential_oracle(1.0, 5.0) == 0.0


def test_gent_locking():
    lam_lock = gent_lock_stretch(5.0)
    assert 2 * lam_lock**2 + lam_lock**-4 - 3 == pytest.approx(5.0, rel=1e-12)
    with pytest.raises(LockingStretch):
        gent_potential_oracle(lam_lock + 1e-6, 5.0)
    with pytest.raises(LockingStretch):
        gent_potential_oracle(0.9, 5.0)


@pytest.mark.parametrize(
    "Im, lam_sup, phi_sup",
    [
        (5.0, 1.9914083470892265, 15.751784223771052),
        (10.0, 1.3223654607716506, 0.7118186025274931),
        (50.0, 1.2679810087927503, 0.6914332180492114),
    ],
)
def test_gent_ascending_limit(Im, lam_sup, phi_sup):
    lam, phi = gent_ascending_limit(Im)
    assert lam == pytest.approx(lam_sup, rel=1e-10)
    assert phi == pytest.approx(phi_sup, rel=1e-10)


def test_gent_curve_monotone_only_for_small_Im():
    lam = np.linspace(1.0, gent_ascending_limit(5.0)[0], 2000)
    assert np.all(np.diff([gent_potential_oracle(x, 5.0) for x in lam]) > 0)
    # for larger Im the curve turns over before locking
    for Im in (10.0, 50.0):
        lam = np.linspace(1.0, 0.999 * gent_lock_stretch(Im), 2000)
        assert np.any(np.diff([gent_potential_oracle(x, Im) for x in lam]) < 0)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.001, 1.25), st.floats(5.0, 40.0), st.floats(1.0, 10.0))
def test_gent_potential_grows_as_Im_shrinks(lam, Im, dIm):
    # a smaller Im removes more of the denominator 1 - x / Im
    assert gent_potential_oracle(lam, Im) > gent_potential_oracle(lam, Im + dIm)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.sampled_from([5.0, 10.0, 50.0]))
def test_gent_inverse_round_trip(frac, Im):
    # stretch -> potential -> stretch; the other direction is ill conditioned
    # near lambda = 1 where the potential grows like sqrt(lambda - 1)
    lam = 1.0 + frac * (gent_ascending_limit(Im)[0] - 1.0)
    back = gent_stretch_from_potential(gent_potential_oracle(lam, Im), Im)
    assert back == pytest.approx(lam, rel=1e-12)


# --- ratio test -----------------------------------------------------------------


@pytest.mark.parametrize(
    "res, noise, ok",
    [
        ([1.0, 1e-1, 1e-3, 1e-7], None, True),
        ([1.0, 1e-2, 5e-3, 2.5e-3], None, False),
        ([1.0, 1e-2, 1e-4, 5e-9], [0, 0, 0, 1e-8], True),
        ([1.0, 1e-2, 1e-4, 5e-9], None, True),
        ([1.0, 1e-2, 2e-3, 5e-9], [0, 0, 0, 1e-8], False),
        ([1.0], None, True),
    ],
)
def test_quadratic_ratio(res, noise, ok):
    assert quadratic_ratio_ok(res, noise) is ok


# --- manifest -----------------------------------------------------------------


def test_manifest_covers_every_scenario():
    man = load_manifest()
    assert set(SCENARIOS) <= set(man)
    assert man["cube_hard"]["mu"] == 1000.0 and man["cube_hard"]["mu0"] == 0.001
    assert man["cube_soft_gent"]["Im"] == [5.0, 10.0, 50.0]
    with pytest.raises(ValueError):
        Scenario("cube_hard", {"no_such_key": 1})
    with pytest.raises(ValueError):
        Scenario("no_such_scenario")


# --- command line -------------------------------------------------------------


def test_cli_oracle_json(capsys):
    assert main(["oracle", "cubic", "--k", "3", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["lambda"] == pytest.approx(3.1038034027355366, rel=1e-14)
    assert main(["oracle", "gent-limit", "--Im", "10"]) == 0
    assert "0.7118186" in capsys.readouterr().out


def test_cli_mesh_round_trip(tmp_path, capsys):
    out = tmp_path / "beam.txt"
    assert main(["mesh", "box", "--box", "17.2", "0.84", "5", "--div", "8", "1", "4", "-o", str(out)]) == 0
    assert "nodes 459" in capsys.readouterr().out
    m = read_mesh(out)
    assert m.n_nodes == 459
    assert main(["mesh", str(out)]) == 0


def test_cli_run_cube_hard(tmp_path, capsys):
    assert main(["run", "cube_hard", "-o", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "[PASS] cubic_oracle" in text
    assert (tmp_path / "cube_hard_oracle.csv").read_text().startswith("# mapfe-oracle v1")


def test_cli_errors_return_two(tmp_path, capsys):
    assert main(["run", "no_such_thing", "-o", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["run", "cube_hard", "--set", "mu", "-o", str(tmp_path)]) == 2


PROBLEM = {
    "mesh": {"generator": "box", "box": [1.0, 1.0, 1.0], "divisions": [1, 1, 1]},
    "materials": {0: {"mu": 2.0, "maxwell_branches": [[1.0, 0.5]]}},
    "time": {"t_end": 1.0, "n_steps": 4},
    "dirichlet": [
        {"set": "xmin", "component": 0},
        {"set": "ymin", "component": 1},
        {"set": "zmin", "component": 2},
        {"set": "xmax", "component": 0, "value": 0.2, "program": {"kind": "ramp", "t_ramp": 0.5}},
    ],
    "probes": [{"name": "rx", "kind": "reaction", "set_name": "xmin", "component": 0}],
    "output": {"name": "relax", "checkpoint": "relax.npz"},
}


def test_problem_file_run_and_restart(tmp_path):
    path = tmp_path / "problem.yaml"
    path.write_text(yaml.safe_dump(PROBLEM))
    assert main(["run", str(path), "-o", str(tmp_path), "--vtk"]) == 0
    full = read_probe_csv(tmp_path / "relax.csv")
    assert len(full["t"]) == 5 and full["rx"][-1] < 0
    assert (tmp_path / "relax_final.vtk").exists()

    # stop half way, then restart from the checkpoint
    half = dict(PROBLEM, time={"t_end": 0.5, "n_steps": 2}, output={"name": "half", "checkpoint": "half.npz"})
    (tmp_path / "half.json").write_text(json.dumps(half))
    assert main(["run", str(tmp_path / "half.json"), "-o", str(tmp_path)]) == 0
    assert main(["run", str(path), "-o", str(tmp_path / "r"), "--restart", str(tmp_path / "half.npz")]) == 0
    rest = read_probe_csv(tmp_path / "r" / "relax.csv")
    assert rest["rx"][-1] == full["rx"][-1]


def test_problem_file_rejects_unknown_keys(tmp_path):
    bad = dict(PROBLEM, extra=1)
    with pytest.raises(ConfigError):
        problem_from_dict(bad)
    p = tmp_path / "list.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(p)


# --- VTK ----------------------------------------------------------------------


@pytest.mark.parametrize("mode, ncells", [("lagrange", 2), ("subhex", 16)])
def test_vtk_reference_points_are_nodes(tmp_path, mode, ncells):
    cfg = dict(PROBLEM, mesh={"box": [2.0, 1.0, 1.0], "divisions": [2, 1, 1]})
    problem = problem_from_dict(cfg)
    model = Model(problem)
    path = write_vtk(tmp_path / "a.vtk", model, model.initial_state(), mode=mode)
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0\n")
    assert f"CELL_TYPES {ncells}" in text
    np.testing.assert_allclose(read_vtk_points(path), problem.mesh.nodes, atol=1e-15)


def test_vtk_displacement_matches_affine_solution(tmp_path):
    problem = problem_from_dict(dict(PROBLEM, materials={0: {"mu": 2.0}}))
    res = run_schedule(problem)
    path = write_vtk(tmp_path / "b.vtk", res.model, res.state)
    lines = path.read_text().splitlines()
    i = lines.index("VECTORS u double")
    u = np.array([[float(v) for v in ln.split()] for ln in lines[i + 1 : i + 28]])
    np.testing.assert_allclose(u[:, 0], 0.2 * problem.mesh.nodes[:, 0], atol=1e-10)


def test_unwritable_vtk_path(tmp_path):
    model = Model(problem_from_dict(PROBLEM))
    with pytest.raises(OSError):
        write_vtk(tmp_path / "missing" / "x.vtk", model, model.initial_state())


def test_structured_mesh_is_reused():
    assert structured_hex_mesh().n_nodes == 27
