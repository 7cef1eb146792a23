import json
import math

import pytest

from exchangelab import cli
from exchangelab.errors import ConfigInvalid, IntegratorFailure


def write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_fringe_boson(tmp_path, capsys):
    out = tmp_path / "f"
    assert cli.main(["fringe", "--out", str(out)]) == cli.EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert abs(summary["phase"]) < 1e-8
    assert summary["visibility"] == pytest.approx(1.0, abs=1e-8)
    manifest = json.loads((out / cli.MANIFEST).read_text())
    assert manifest["artifacts"] == ["fringe.csv", "summary.json"]
    assert set(manifest["versions"]) >= {"numpy", "scipy", "numba"}


def test_fringe_fermion_config(tmp_path):
    cfg = write(tmp_path / "c.json", {"params": {"statistics": "fermion", "variant": "two_dim", "n": 4}})
    s = cli.run("fringe", cfg, out=str(tmp_path / "o"))
    assert abs(abs(s["phase"]) - math.pi) < 1e-8


def test_manifest_rerun_is_identical(tmp_path):
    first = tmp_path / "a"
    cfg = write(tmp_path / "c0.json", {"params": {"trials": 2}})
    assert cli.main(["dephase", "--config", cfg, "--out", str(first), "--seed", "42"]) == cli.EXIT_OK
    cfg = json.loads((first / cli.MANIFEST).read_text())
    cfg["config"]["params"]["trials"] = 5
    cfg["config"]["params"]["channels"] = ["static_gradient", "fast_gradient"]
    cfg_path = write(tmp_path / "m.json", cfg)
    second, third = tmp_path / "b", tmp_path / "c"
    assert cli.main(["dephase", "--config", cfg_path, "--out", str(second)]) == cli.EXIT_OK
    assert cli.main(["dephase", "--config", str(second / cli.MANIFEST), "--out", str(third)]) == cli.EXIT_OK
    assert (second / "dephase.csv").read_text() == (third / "dephase.csv").read_text()
    assert json.loads((third / cli.MANIFEST).read_text())["config"]["seed"] == 42


def test_no_temp_files_left(tmp_path):
    cli.main(["thermal", "--out", str(tmp_path)])
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


def test_atomic_write_cleans_up_on_error(tmp_path, monkeypatch):
    def boom(*_):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", boom)
    with pytest.raises(OSError):
        cli.write_json(tmp_path / "x.json", {"a": 1})
    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize(
    "cfg",
    [
        {"params": {"bogus": 1}},
        {"extra": True},
        {"params": {"statistics": "anyon"}},
        {"params": {"phases": {"dphi4": 0.0}}},
        {"seed": -1},
    ],
)
def test_schema_rejection(tmp_path, cfg, capsys):
    path = write(tmp_path / "c.json", cfg)
    assert cli.main(["fringe", "--config", path, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "ConfigInvalid" in capsys.readouterr().err


def test_unreadable_config(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    with pytest.raises(ConfigInvalid):
        cli.load_config("fringe", str(tmp_path / "c.json"))


def test_bad_separation_exit_code(tmp_path, capsys):
    path = write(tmp_path / "c.json", {"params": {"n": 3}})
    assert cli.main(["fringe", "--config", path, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "BadSeparation" in capsys.readouterr().err


def test_seed_range(tmp_path):
    assert cli.main(["fringe", "--seed", str(2**64), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def fail(*_):
        raise IntegratorFailure("norm drift")

    monkeypatch.setitem(cli.COMMANDS, "fringe", fail)
    assert cli.main(["fringe", "--out", str(tmp_path)]) == cli.EXIT_NUMERIC


def test_defaults_filled():
    cfg = cli.load_config("rotor-ramp", None)
    assert cfg["params"]["a_start"] == -4e-4 and cfg["params"]["duration"] == 2e-3
    assert cfg["params"]["trap"]["q"] == 0.2


def test_small_zeeman_scan(tmp_path):
    cfg = write(tmp_path / "c.json", {"params": {"rho_min": 1.8, "rho_max": 2.2, "rho_step": 0.1}})
    s = cli.run("zeeman-scan", cfg, out=str(tmp_path / "o"), threads=2)
    assert s["points"] == 5
    assert [round(m["rho"], 6) for m in s["minima"]] == [2.0]
    lines = (tmp_path / "o" / "zeeman_scan.csv").read_text().splitlines()
    assert lines[0] == "rho,p_err,residual_phase,closed_form" and len(lines) == 6


def test_small_rotor_spectrum(tmp_path):
    cfg = write(tmp_path / "c.json", {"params": {"points": 5, "N": 128, "k": 4}})
    s = cli.run("rotor-spectrum", cfg, out=str(tmp_path / "o"))
    assert s["critical_splitting_hz"] == pytest.approx(30e3, rel=0.01)
    assert s["min_same_symmetry_gap_hz"] > 10e3
    header = (tmp_path / "o" / "spectrum.csv").read_text().splitlines()[0]
    assert header.split(",")[-1] == "same_symmetry_gap_hz"


def test_parser_lists_all_commands():
    parser = cli.build_parser()
    for name in cli.COMMANDS:
        assert parser.parse_args([name]).command == name
