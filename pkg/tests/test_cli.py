import json
import shutil

import pytest

from cradon import cli
from cradon import config as cf

FIXTURES = cli.fixtures_dir()


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data))
    return p


# ---------------------------------------------------------------- config schema


def test_defaults_are_injected_and_echoed():
    cfg = cf.load_config({"experiment": "calibrate", "name": "c"})
    echo = cfg.echo()
    assert echo["params"]["sgrid"] == {"center": [0.0, 0.0], "extent": 1.5, "count": 129}
    assert echo["seed"] == 0


def test_unknown_keys_rejected_with_field_path():
    with pytest.raises(cf.ConfigInvalid) as info:
        cf.load_config({"experiment": "calibrate", "name": "c", "params": {"sgrid": {"bogus": 1}}})
    assert info.value.problems[0][0] == "params.sgrid.bogus"


def test_negative_extent_rejected():
    with pytest.raises(cf.ConfigInvalid) as info:
        cf.load_config({"experiment": "invert", "name": "x", "params": {"functions": [{"name": "g", "fn": {"kind": "gaussian"}}], "sgrid": {"extent": -1}}})
    assert info.value.problems[0][0] == "params.sgrid.extent"


def test_complex_number_forms():
    cfg = cf.load_config({"experiment": "support-converse", "name": "x", "params": {
        "distribution": [], "set": {"ball": {"radius": 1}}, "witness": [1.5, [0, 2]]}})
    assert cf.point(cfg.params.witness) == (1.5 + 0j, 2j)


def test_set_needs_exactly_one_kind():
    with pytest.raises(cf.ConfigInvalid):
        cf.load_config({"experiment": "support-forward", "name": "x", "params": {
            "distribution": [], "set": {"ball": {"radius": 1}, "point": {"at": [0, 0]}}, "margin": 0.2}})


def test_override_parses_json_values():
    data = {"experiment": "calibrate", "name": "c", "params": {"radii": [0.0]}}
    cf.apply_override(data, "params.sgrid.count=65")
    cf.apply_override(data, "params.radii.0=0.25")
    cf.apply_override(data, "description=hello")
    assert data["params"]["sgrid"]["count"] == 65
    assert data["params"]["radii"] == [0.25]
    assert data["description"] == "hello"
    with pytest.raises(ValueError):
        cf.apply_override(data, "no-equals-sign")


def test_builders_cover_every_set_kind():
    sets = [
        {"ball": {"radius": 1}},
        {"point": {"at": [0, 0]}},
        {"union": [{"ball": {"radius": 1}}, {"point": {"at": [2, 0]}}]},
        {"annulus2d": {"rin": 0.5, "rout": 1}},
        {"polydisc": {"radii": [1, 0.5]}},
        {"dilation": {"base": {"point": {"at": [0, 0]}}, "eps": 0.1}},
    ]
    kinds = [cf.build_set(cf.SetCfg.model_validate(s)).kind for s in sets]
    assert kinds == ["ball", "finite-point-set", "union", "embedded-annulus", "polydisc", "dilation"]


# ---------------------------------------------------------------- fixtures


def test_shipped_fixtures_listed_and_valid():
    listing = cli.list_fixtures()
    names = {n for n, _, _ in listing}
    assert len(listing) >= 10
    assert {"gaussian_roundtrip", "lemma1_bump", "annulus_condition_iii", "calibrate", "support_annulus"} <= names
    assert all(err is None for _, _, err in listing)
    kinds = {cli.load(FIXTURES / f"{n}.json").experiment for n in names}
    assert kinds == set(cf.EXPERIMENTS)


def test_fixture_name_matches_file():
    for f in FIXTURES.glob("*.json"):
        assert json.loads(f.read_text())["name"] == f.stem


def test_empty_fixture_dir(tmp_path, capsys):
    assert cli.list_fixtures(tmp_path) == []
    assert cli.main(["fixtures", "--dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out == ""


def test_corrupted_fixture_is_marked(tmp_path, capsys):
    shutil.copy(FIXTURES / "calibrate.json", tmp_path / "calibrate.json")
    write(tmp_path, '{"experiment": "calibrate", "name": ', "broken.json")
    write(tmp_path, {"experiment": "calibrate", "name": "bad", "params": {"tol": -1}}, "bad.json")
    listing = {n: err for n, _, err in cli.list_fixtures(tmp_path)}
    assert listing["calibrate"] is None
    assert "line 1" in listing["broken"]
    assert "params.tol" in listing["bad"]
    assert cli.main(["fixtures", "--dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("[invalid]") == 2


# ---------------------------------------------------------------- run and exit codes


def test_run_calibrate_fixture(tmp_path):
    assert cli.main(["run", str(FIXTURES / "calibrate.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "calibrate.json").read_text())
    assert rep["status"] == "pass"
    assert abs(rep["provenance"]["c_hat"] - 0.0161257) / 0.0161257 < 1e-3
    assert (tmp_path / "calibrate.csv").exists()
    assert rep["config"]["params"]["sgrid"]["count"] == 129


def test_run_support_annulus_exits_2(tmp_path, capsys):
    assert cli.main(["run", "support_annulus", "--out", str(tmp_path)]) == 2
    assert "hypothesis violated" in capsys.readouterr().out
    assert json.loads((tmp_path / "support_annulus.json").read_text())["status"] == "hypothesis violated"


def test_negative_extent_exits_64(tmp_path, capsys):
    cfg = json.loads((FIXTURES / "gaussian_roundtrip.json").read_text())
    cfg["params"]["sgrid"] = {"extent": -6.0}
    assert cli.main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path)]) == 64
    assert "params.sgrid.extent" in capsys.readouterr().err


def test_json_syntax_error_reports_line(tmp_path, capsys):
    p = write(tmp_path, '{\n  "experiment": "calibrate",\n  "name": "x",,\n}')
    assert cli.main(["run", str(p)]) == 64
    assert "line 3" in capsys.readouterr().err


def test_missing_config_exits_64(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.json")]) == 64


def test_override_applied_and_invalid_override_rejected(tmp_path):
    assert cli.main(["run", "geometry_disk", "--out", str(tmp_path), "--override", "params.resolution=64"]) == 0
    rep = json.loads((tmp_path / "geometry_disk.json").read_text())
    assert rep["config"]["params"]["resolution"] == 64
    assert cli.main(["run", "geometry_disk", "--override", "params.resolution=4"]) == 64


def test_failing_check_exits_1(tmp_path):
    code = cli.main(["run", "forward_gaussian", "--out", str(tmp_path), "--override", "params.quad.n_r=2", "--override", "params.quad.n_phi=2"])
    assert code == 1
    assert json.loads((tmp_path / "forward_gaussian.json").read_text())["status"] == "fail"


def test_numerical_error_exits_1_and_names_operation(tmp_path, capsys):
    cfg = {"experiment": "support-forward", "name": "tight", "params": {
        "distribution": [{"measure": {"point": {"at": [0, 0]}}}], "set": {"point": {"at": [0, 0]}}, "margin": 0.05}}
    assert cli.main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path)]) == 1
    assert "support_forward" in capsys.readouterr().err


def test_attain_on_smooth_kernel_is_config_error(tmp_path):
    cfg = {"experiment": "dual-bound", "name": "x", "params": {"h": {"kind": "gaussian-s"}, "R": 1, "probes": [[0, 0]], "attain": [0]}}
    assert cli.main(["run", str(write(tmp_path, cfg))]) == 64


def test_binary_dumps(tmp_path):
    from cradon import container

    cfg = json.loads((FIXTURES / "poly_roundtrip.json").read_text())
    cfg["params"].update({"dump_sinogram": True, "dump_volume": True, "volume": {"extent": 1.0, "count": 5}, "radius": 1.0})
    assert cli.main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path)]) == 0
    S = container.read(tmp_path / "poly_roundtrip.gaussian-poly.crdn")
    V = container.read(tmp_path / "poly_roundtrip.gaussian-poly.crvl")
    assert S.values.shape == (256, 129 * 129)
    assert V.values.shape == (5, 5, 5, 5)


def test_degenerate_roundtrip_volume_is_an_error(tmp_path, capsys):
    # every 3-point-grid node inside |z|<=1 has z1 = 0 or z2 = 0, where z1 conj(z2) e^{-|z|^2} vanishes
    args = ["run", "poly_roundtrip", "--out", str(tmp_path), "--override", 'params.volume={"extent": 1.0, "count": 3}', "--override", "params.radius=1.0"]
    assert cli.main(args) == 1
    assert "relative error undefined" in capsys.readouterr().err


def test_calibrate_command(capsys):
    assert cli.main(["calibrate", "--res", "65"]) == 0
    assert "c_hat" in capsys.readouterr().out
    assert cli.main(["calibrate", "--res", "64"]) == 64


def test_console_script_entry_point():
    from importlib.metadata import entry_points

    eps = {e.name: e.value for e in entry_points(group="console_scripts")}
    assert eps.get("cradon") == "cradon.cli:main"


def test_repeated_runs_identical_except_timing(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert cli.main(["run", "support_forward_delta", "--out", str(d)]) == 0
        rep = json.loads((d / "support_forward_delta.json").read_text())
        rep.pop("wall_ms")
        outs.append(json.dumps(rep, sort_keys=True))
    assert outs[0] == outs[1]
