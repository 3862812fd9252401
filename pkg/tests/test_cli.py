import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bohmflow import cli
from bohmflow import scenario as scn
from bohmflow.errors import ScenarioError



def raw(name):
    return scn.load_raw(scn.bundled(name))


def write(tmp_path, d, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


@pytest.mark.parametrize("path", scn.bundled(), ids=lambda p: p.stem)
def test_bundled_scenarios_parse_and_roundtrip(path):
    sc = scn.load(path)
    again = scn.parse(sc.to_dict())
    assert again.to_dict() == sc.to_dict()
    assert again.digest() == sc.digest()


@pytest.mark.parametrize("path", scn.bundled(), ids=lambda p: p.stem)
def test_bundled_smoke(path, tmp_path):
    d = scn.load_raw(path)
    args = [d["command"], str(path), "--out-dir", str(tmp_path)]
    if d["command"] == "limits":
        args += ["--mode", d["mode"]]
    assert cli.run(args) == 0


def test_plane_wave_final_row(tmp_path):
    assert cli.run(["simulate", "plane_wave", "--out-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "plane_wave.csv").read_text().splitlines()
    assert lines[0].startswith("sigma,particle,t,x,v_t,v_x,tau")
    last = lines[-1].split(",")
    assert float(last[3]) == pytest.approx(0.3 * float(last[0]), abs=1e-10)
    man = json.loads((tmp_path / "simulate_manifest.json").read_text())
    assert {"scenario_sha256", "seed", "versions", "wall_time_s"} <= set(man)


def test_override_halves_step(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run(["simulate", "plane_wave", "--out-dir", str(a)]) == 0
    assert cli.run(["simulate", "plane_wave", "--out-dir", str(b), "--override", "integrator.d_sigma=0.005"]) == 0
    na = len((a / "plane_wave.csv").read_text().splitlines()) - 1
    nb = len((b / "plane_wave.csv").read_text().splitlines()) - 1
    assert nb == 2 * na - 1  # rows are steps + 1


def test_missing_mass_names_field(tmp_path, capsys):
    d = raw("plane_wave")
    del d["particles"][0]["mass"]
    assert cli.run(["simulate", write(tmp_path, d)]) == cli.EXIT_CONFIG
    assert "mass" in capsys.readouterr().err


def test_missing_constants_rejected():
    d = raw("plane_wave")
    del d["constants"]["hbar"]
    with pytest.raises(ScenarioError) as err:
        scn.parse(d)
    assert err.value.field == "constants.hbar"


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "name": "x",\n  "constants": {\n')
    with pytest.raises(ScenarioError) as err:
        scn.load(p)
    assert err.value.line == 4


def test_unknown_key_and_particle_index():
    d = raw("plane_wave")
    d["colour"] = "red"
    with pytest.raises(ScenarioError):
        scn.parse(d)
    d = raw("plane_wave")
    d["wavefunction"]["terms"][0]["modes"][0]["particle"] = 3
    with pytest.raises(ScenarioError):
        scn.parse(d)


def test_omega_is_recomputed():
    d = raw("plane_wave")
    d["wavefunction"]["terms"][0]["modes"][0]["omega"] = 5.0
    sc = scn.parse(d)
    assert -sc.wavefunction.q[0, 0, -1] == pytest.approx(np.sqrt(1.09))


def test_reports_are_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert cli.run(["equivariance", "two_mode", "--seed", "42", "--out-dir", str(tmp_path / sub)]) == 0
    a = (tmp_path / "a" / "equivariance_report.json").read_bytes()
    assert a == (tmp_path / "b" / "equivariance_report.json").read_bytes()
    assert json.loads(a)["passed"] is True


def test_corrupted_flow_fails(tmp_path):
    code = cli.run(["equivariance", "two_mode", "--corrupt-velocities", "1.1", "--out-dir", str(tmp_path)])
    assert code == cli.EXIT_FAILED
    rep = json.loads((tmp_path / "equivariance_report.json").read_text())
    assert rep["passed"] is False
    assert {"test", "statistic", "critical", "passed", "n", "seed", "edge_loss"} <= set(rep)


def test_empty_scan_is_config_error(tmp_path):
    code = cli.run(["limits", "classical_limit", "--mode", "classical", "--out-dir", str(tmp_path),
                    "--override", "limits.classical.hbar_values=[]"])
    assert code == cli.EXIT_CONFIG


def test_sample_command(tmp_path):
    d = raw("two_mode")
    d["sampler"]["n"] = 500
    assert cli.run(["sample", write(tmp_path, d), "--out-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "ensemble.csv").read_text().splitlines()
    assert rows[0] == "sample_id,particle,t,x" and len(rows) == 501


def test_node_start_exits_nonzero(tmp_path, capsys):
    d = raw("plane_wave")
    d["wavefunction"]["terms"] = [
        {"coefficient": [1, 0], "modes": [{"particle": 0, "k": [0.5]}]},
        {"coefficient": [-1, 0], "modes": [{"particle": 0, "k": [-0.5]}]}]
    d.pop("expect")
    assert cli.run(["simulate", write(tmp_path, d), "--out-dir", str(tmp_path)]) == cli.EXIT_HALTED
    assert "node" in capsys.readouterr().err


def test_missing_file(capsys):
    assert cli.run(["simulate", "/nonexistent/file.json"]) == cli.EXIT_IO


def test_atomic_write_leaves_no_temp(tmp_path):
    cli.atomic_write(tmp_path / "x.json", "{}\n")
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.integers(0, 2 ** 31), st.floats(-2, 2))
def test_parse_roundtrip_property(hbar, c, seed, k):
    d = raw("plane_wave")
    d["constants"] = {"hbar": hbar, "c": c}
    d["seed"] = seed
    d["wavefunction"]["terms"][0]["modes"][0]["k"] = [k]
    sc = scn.parse(d)
    assert scn.parse(sc.to_dict()).to_dict() == sc.to_dict()
    assert sc.wavefunction.terms[0].modes[0].shell_residual(sc.particles[0], sc.constants) == pytest.approx(0, abs=1e-12)
