"""End-to-end checks of the command-line surface via main()."""

from __future__ import annotations

import json

import pytest

from w2lab import __version__
from w2lab.cli import main
from w2lab.suites import SUITE_IDS

SMALL_CONFIG = {
    "model": {"name": "ou", "n": 129},
    "densities": {"tilts": [0.5], "mixtures": 1, "perturbations": 1},
    "suites": ["thm1", "decay"],
    "figures": False,
}


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL_CONFIG))
    return path


def test_no_command_prints_help(capsys):
    assert main([]) == 2
    assert "usage: w2lab" in capsys.readouterr().out


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_list_suites(capsys, tmp_path):
    assert main(["run", "--out", str(tmp_path), "--list-suites"]) == 0
    assert capsys.readouterr().out.split() == list(SUITE_IDS)


def test_run_small_config(config_path, tmp_path, capsys):
    out_dir = tmp_path / "out"
    code = main(["run", "--config", str(config_path), "--out", str(out_dir)])
    captured = capsys.readouterr().out
    assert code == 0
    assert "suite" in captured and "total" in captured
    assert "FAIL" not in captured
    assert (out_dir / "report.json").exists()
    assert (out_dir / "summary.csv").exists()
    data = json.loads((out_dir / "report.json").read_text())
    suites_seen = {rec["suite"] for rec in data["reports"]}
    assert suites_seen == {"thm1", "decay"}


def test_run_twice_byte_identical(config_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(config_path), "--out", str(a)]) == 0
    assert main(["run", "--config", str(config_path), "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_no_figures_flag_suppresses_rendering(tmp_path):
    cfg = dict(SMALL_CONFIG, figures=True, suites=["decay"])
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    out_dir = tmp_path / "out"
    code = main(["run", "--config", str(path), "--out", str(out_dir), "--no-figures"])
    assert code == 0
    assert not list(out_dir.glob("*.png"))


def test_bad_config_field_is_exit_2(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"model": {"name": "nope"}}))
    code = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
    assert code == 2
    err = capsys.readouterr().err
    assert "config error" in err and "model.name" in err


def test_unparseable_config_is_exit_2(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    code = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "valid JSON" in capsys.readouterr().err


def test_missing_config_file_is_exit_2(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "ghost.json"), "--out", str(tmp_path)])
    assert code == 2
    assert "cannot read" in capsys.readouterr().err


class TestCompute:
    def test_gap(self, capsys):
        assert main(["compute", "gap", "--n", "129"]) == 0
        out = capsys.readouterr().out
        assert "C_P=" in out
        c_p = float(out.split("C_P=")[1].split()[0])
        assert c_p == pytest.approx(1.0, abs=2e-2)

    def test_w2(self, capsys):
        assert main(["compute", "w2", "--n", "257", "--tilt", "0.5"]) == 0
        out = capsys.readouterr().out
        dist = float(out.split("W2=")[1].split()[0])
        assert dist == pytest.approx(0.5, abs=5e-3)

    def test_evolve(self, capsys):
        assert main(["compute", "evolve", "--n", "129", "--time", "0.5"]) == 0
        out = capsys.readouterr().out
        for key in ("variance=", "entropy=", "fisher=", "dirichlet="):
            assert key in out

    def test_hopflax(self, capsys):
        assert main(["compute", "hopflax", "--n", "129", "--time", "1.0"]) == 0
        out = capsys.readouterr().out
        # the kink vertex sits on a node, so the infimum there is exactly zero
        assert float(out.split("min=")[1].split()[0]) == 0.0

    def test_unknown_model_is_exit_2(self, capsys):
        assert main(["compute", "gap", "--model", "nope"]) == 2
        assert "config error" in capsys.readouterr().err
