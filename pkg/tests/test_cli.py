from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from psafe.border import BorderPoint, BorderPolyline
from psafe.cli import main, read_polyline_csv, write_polyline_csv
from psafe.config import RunConfig, dump_config, load_config
from psafe.errors import ConfigurationError

ROOT = Path(__file__).resolve().parents[1]

DISK = {
    "model": {"name": "bm", "params": {"d": 2}},
    "region": {"type": "sphere", "center": [0, 0], "radius": 3},
    "p": 0.5,
    "T": 0.2,
    "N": 2000,
    "n": 50,
    "seed": 3,
    "optimizer": {"lambda": 0.05, "max_iters": 50, "err_tol": 0.03},
    "walk": {"gamma": 0.8, "step_min": 5},
    "start": [2.4, 0.0],
}


def write_cfg(tmp_path, data, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


class TestRunConfig:
    def test_shipped_configs_load(self):
        for path in sorted((ROOT / "configs").glob("*.yaml")):
            cfg = load_config(path)
            assert cfg.walk is not None

    def test_roundtrip(self):
        for path in sorted((ROOT / "configs").glob("*.yaml")):
            cfg = load_config(path)
            again = RunConfig.from_dict(yaml.safe_load(dump_config(cfg)))
            assert again.to_dict() == cfg.to_dict()
        cfg = RunConfig.from_dict(DISK)
        assert RunConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()

    @pytest.mark.parametrize(
        "patch,field",
        [
            ({"N": -5}, "N"),
            ({"p": 1.5}, "p"),
            ({"T": 0}, "T"),
            ({"n": 0}, "n"),
            ({"model": {"name": "nope"}}, "model"),
            ({"region": {"type": "torus"}}, "region"),
            ({"optimizer": {"lambda": -1}}, "lambda"),
            ({"walk": {"gamma": 0}}, "gamma"),
            ({"start": [1, 2, 3]}, "start"),
            ({"colour": "red"}, "colour"),
            ({"clock": "fast"}, "clock"),
            ({"axis": 4}, "axis"),
        ],
    )
    def test_invalid_names_field(self, patch, field):
        with pytest.raises(ConfigurationError, match=field):
            RunConfig.from_dict({**DISK, **patch})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "nope.yaml")

    def test_overrides(self):
        cfg = RunConfig.from_dict(DISK).with_overrides(seed=9, threads=4, output_dir="x")
        assert cfg.seed == 9 and cfg.threads == 4 and cfg.output_dir == "x"
        assert cfg.estimate_config().workers == 4


class TestCsv:
    def test_roundtrip(self, tmp_path):
        pts = [
            BorderPoint(np.array([1.0, 2.5]), 0.51, np.array([0.1, -0.2]), 0, 4, 0.004, None),
            BorderPoint(np.array([1.1, 2.4]), 0.49, np.array([0.3, 1e-17]), 1, 4, 0.005, None),
        ]
        path = tmp_path / "p.csv"
        write_polyline_csv(path, BorderPolyline(pts, True, None, 4, "closed"), 2)
        text = path.read_text().splitlines()
        assert text[0].startswith("# closed=true")
        assert text[1] == "section_id,index,x1,x2,p_hat,se_p,grad1,grad2"
        back = read_polyline_csv(path)
        assert back.closed and len(back) == 2
        for a, b in zip(pts, back.points):
            np.testing.assert_array_equal(a.x, b.x)
            np.testing.assert_array_equal(a.grad, b.grad)
            assert a.p_hat == b.p_hat and a.se_p == b.se_p and b.section_id == 4


class TestCommands:
    def test_oracle(self, capsys):
        assert main(["oracle-bm1d", "--x", "0.5", "--T", "0.05"]) == 0
        out = capsys.readouterr().out
        line = next(l for l in out.splitlines() if l.startswith("JSON "))
        data = json.loads(line[5:])
        assert abs(data["dp_dx"]) < 1e-12
        assert 0 < data["p"] < 1

    def test_oracle_limits(self, capsys):
        main(["oracle-bm1d", "--x", "0.5", "--T", "0", "--terms", "999"])
        p0 = json.loads(capsys.readouterr().out.splitlines()[-1][5:])["p"]
        assert p0 >= 0.999
        main(["oracle-bm1d", "--x", "0.5", "--T", "50"])
        assert json.loads(capsys.readouterr().out.splitlines()[-1][5:])["p"] < 1e-100

    def test_oracle_bad_x(self):
        assert main(["oracle-bm1d", "--x", "1.5", "--T", "0.1"]) == 2

    def test_estimate(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, DISK)
        assert main(["estimate", "--config", str(cfg), "--x", "0", "0"]) == 0
        data = json.loads(capsys.readouterr().out.splitlines()[-1][5:])
        assert data["p_hat"] > 0.99

    def test_estimate_toy3d_near_center(self, capsys):
        cfg = ROOT / "configs" / "toy3d_sphere.yaml"
        assert main(["estimate", "--config", str(cfg), "--x", "1", "1", "1"]) == 0
        data = json.loads(capsys.readouterr().out.splitlines()[-1][5:])
        assert data["p_hat"] > 0.99

    def test_estimate_errors(self, tmp_path, capsys):
        bad = write_cfg(tmp_path, {**DISK, "N": -4})
        assert main(["estimate", "--config", str(bad), "--x", "0", "0"]) == 2
        assert "N" in capsys.readouterr().err
        good = write_cfg(tmp_path, DISK, "good.yaml")
        assert main(["estimate", "--config", str(good), "--x", "5", "0"]) == 3
        assert "start point outside region" in capsys.readouterr().err
        assert main(["estimate", "--config", str(good), "--x", "0"]) == 2
        assert main(["estimate", "--x", "0", "0"]) == 2
        assert main(["bogus"]) == 2

    def test_walk_and_check_inside(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, DISK)
        out = tmp_path / "out"
        assert main(["walk", "--config", str(cfg), "--out", str(out)]) == 0
        csv_path = out / "points.csv"
        poly = read_polyline_csv(csv_path)
        assert poly.closed and len(poly) > 5
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["outputs"]["points.csv"]
        assert manifest["sections"][0]["status"] == "closed"
        assert manifest["config"]["seed"] == 3
        capsys.readouterr()

        assert main(["check-inside", "--config", str(cfg), "--polyline", str(csv_path), "--x", "0", "0"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "Inside"
        assert main(["check-inside", "--polyline", str(csv_path), "--x", "5", "0"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "Unknown"

        lines = csv_path.read_text().splitlines()
        lines[0] = "# closed=false status=open"
        open_path = tmp_path / "open.csv"
        open_path.write_text("\n".join(lines) + "\n")
        assert main(["check-inside", "--polyline", str(open_path), "--x", "0", "0"]) == 5
        assert "closed border" in capsys.readouterr().err

        junk = tmp_path / "junk.csv"
        junk.write_text("a,b\n1,2\n")
        assert main(["check-inside", "--polyline", str(junk), "--x", "0", "0"]) == 5

    def test_walk_is_reproducible(self, tmp_path):
        cfg = write_cfg(tmp_path, DISK)
        main(["walk", "--config", str(cfg), "--out", str(tmp_path / "a")])
        main(["walk", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "4"])
        a = (tmp_path / "a" / "points.csv").read_bytes()
        b = (tmp_path / "b" / "points.csv").read_bytes()
        assert a == b
        ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
        mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert ma["output_hash"] == mb["output_hash"]

    def test_walk_stall_exit_code(self, tmp_path, capsys):
        # deep inside the disk the probability is flat at 1
        cfg = write_cfg(tmp_path, {**DISK, "start": [0.0, 0.0]})
        assert main(["walk", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4
        assert "start point" in capsys.readouterr().err

    def test_walk_auto_start(self, tmp_path):
        cfg = write_cfg(tmp_path, {**DISK, "start": "auto"})
        assert main(["walk", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert "probe" in manifest["start_search"]

    def test_sections_require_3d(self, tmp_path):
        cfg = write_cfg(tmp_path, {**DISK, "walk": {"gamma": 0.8, "delta": 1.0}})
        assert main(["sections", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "psafe", "oracle-bm1d", "--x", "0.3", "--T", "0.1"], capture_output=True, text=True)
        assert res.returncode == 0 and "dP/dx" in res.stdout
        res = subprocess.run([sys.executable, "-m", "psafe", "--help"], capture_output=True, text=True)
        assert "exit codes" in res.stdout
