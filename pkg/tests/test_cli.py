import csv
import json
import math
import subprocess
import sys

import pytest

from epsim.cli import main
from epsim.config import ConfigError, list_presets, load_config, parse_config

PRESETS = ["fig1e", "fig1f", "fig2", "fig3", "figS1", "figS2", "figS3", "spectrum"]

LOOP = """
[loop]
j_max = 30.0
j_min = 0.3
delta_amp = 31.41592653589793
period_us = 1.5
direction = "ccw"

[rates]
gamma_e = 6.2
"""


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(command, config, out, *extra):
    return main([command, "--config", config, "--out", str(out), *extra])


class TestConfig:
    def test_presets_ship_and_validate(self):
        assert set(PRESETS) <= set(list_presets())
        for name in PRESETS:
            cfg = load_config(name)
            assert cfg.experiment in ("spectrum", "tomography", "phase", "transfer_map")

    def test_fig3_grid_is_twenty_by_twenty(self):
        opts = load_config("fig3").options
        assert opts["j_min"].size == 20 and opts["period_us"].size == 20
        assert 6.0 in opts["j_min"] and 0.3 in opts["j_min"]

    @pytest.mark.parametrize("patch, message", [
        ({"experiment": "bogus"}, "experiment"),
        ({"engine": "qutip"}, "engine"),
        ({"sampling": {"shots": 0}}, "shots"),
        ({"parallel": {"jobs": 0}}, "jobs"),
        ({"rates": {"gamma_e": -1}}, "gamma_e"),
        ({"tomography": {"n_pauses": 1}}, "n_pauses"),
        ({"loop": {"j_max": 30}}, "missing"),
    ])
    def test_rejections(self, patch, message):
        data = {"experiment": "tomography", "engine": "nh",
                "loop": {"j_max": 30, "j_min": 0.3, "delta_amp": 31.4, "period_us": 1.5},
                "rates": {"gamma_e": 6.2}}
        data.update(patch)
        with pytest.raises(ConfigError, match=message):
            parse_config(data)

    def test_overrides(self):
        cfg = load_config("fig1e", seed=9, out="elsewhere", jobs=3)
        assert (cfg.seed, str(cfg.output_dir), cfg.jobs) == (9, "elsewhere", 3)
        assert cfg.loop.gamma == 6.2

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/run.toml")


class TestSpectrum:
    def test_two_by_two(self, tmp_path):
        cfg = write(tmp_path, 'experiment = "spectrum"\n[spectrum]\nj = [1.0, 2.0]\ndelta = [0.0, 0.5]\ngamma = 6.2\n')
        assert run("spectrum", cfg, tmp_path / "out") == 0
        rows = read_csv(tmp_path / "out" / "riemann_surface.csv")
        assert len(rows) == 5

    def test_empty_grid_creates_nothing(self, tmp_path, capsys):
        cfg = write(tmp_path, 'experiment = "spectrum"\n[spectrum]\nj = []\ndelta = [0.0]\n')
        assert run("spectrum", cfg, tmp_path / "out") == 2
        assert not (tmp_path / "out").exists()
        assert "empty" in capsys.readouterr().err

    def test_default_preset_markers(self, tmp_path):
        assert run("spectrum", "spectrum", tmp_path) == 0
        markers = read_csv(tmp_path / "ep_markers.csv")
        assert markers == [["J", "Delta"], ["1.55", "0"], ["-1.55", "0"]]
        assert len(read_csv(tmp_path / "riemann_surface.csv")) == 81 * 81 + 1


class TestEncircle:
    def test_presets(self, tmp_path):
        assert run("encircle", "fig1e", tmp_path / "e") == 0
        assert run("encircle", "fig1f", tmp_path / "f") == 0
        e = read_csv(tmp_path / "e" / "tomography.csv")
        f = read_csv(tmp_path / "f" / "tomography.csv")
        assert e[0] == ["t_us", "x", "y", "z", "survival", "x_eig", "y_eig", "z_eig"]
        assert len(e) == 61
        assert float(e[-1][1]) >= 0.8
        assert float(f[-1][4]) < float(e[-1][4])

    def test_exact_versus_sampled(self, tmp_path):
        text = 'experiment = "tomography"\n' + LOOP + "[tomography]\nn_pauses = 12\n"
        exact = write(tmp_path, text + '[sampling]\nshots = "exact"\nseed = 4\n', "exact.toml")
        shots = write(tmp_path, text + "[sampling]\nshots = 10000\nseed = 4\n", "shots.toml")
        assert run("encircle", exact, tmp_path / "a") == 0
        assert run("encircle", shots, tmp_path / "b") == 0
        a = read_csv(tmp_path / "a" / "tomography.csv")
        b = read_csv(tmp_path / "b" / "tomography.csv")
        assert [r[0] for r in a] == [r[0] for r in b]
        assert any(ra[1:4] != rb[1:4] for ra, rb in zip(a[1:], b[1:]))

    def test_trajectory_output(self, tmp_path):
        cfg = write(tmp_path, 'experiment = "tomography"\n' + LOOP +
                    "[tomography]\nn_pauses = 3\ntrajectory_stride = 150\n")
        assert run("encircle", cfg, tmp_path) == 0
        rows = read_csv(tmp_path / "trajectory.csv")
        assert len(rows) == 12
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert set(manifest["outputs"]) == {"tomography.csv", "trajectory.csv"}

    def test_runtime_failure_exit_code(self, tmp_path):
        text = ('experiment = "tomography"\n[loop]\nj_max = 0.0\nj_min = 0.0\ndelta_amp = 0.0\n'
                "period_us = 1.0\n[rates]\ngamma_e = 100.0\n")
        assert run("encircle", write(tmp_path, text), tmp_path / "out") == 3

    def test_experiment_mismatch(self, tmp_path):
        assert run("encircle", "fig3", tmp_path) == 2

    def test_manifest_round_trip(self, tmp_path):
        cfg = write(tmp_path, 'experiment = "tomography"\n' + LOOP +
                    "[tomography]\nn_pauses = 7\n[sampling]\nshots = 500\nseed = 11\n")
        assert run("encircle", cfg, tmp_path / "first") == 0
        manifest = tmp_path / "first" / "manifest.json"
        data = json.loads(manifest.read_text())
        assert data["version"] and data["config"]["sampling"]["seed"] == 11
        assert run("encircle", str(manifest), tmp_path / "second") == 0
        assert ((tmp_path / "first" / "tomography.csv").read_bytes()
                == (tmp_path / "second" / "tomography.csv").read_bytes())
        again = json.loads((tmp_path / "second" / "manifest.json").read_text())
        assert again["outputs"] == data["outputs"]


PHASE = """experiment = "phase"
engine = "nh"
[loop]
j_max = 30.0
j_min = 0.0
delta_amp = 31.41592653589793
period_us = 0.8
[rates]
gamma_e = 6.2
[phase]
j_min = {grid}
directions = {dirs}
n_phase_points = 11
"""


class TestPhase:
    def test_both_directions_single_j(self, tmp_path):
        cfg = write(tmp_path, PHASE.format(grid="[0.0]", dirs='["ccw", "cw"]'))
        assert run("phase", cfg, tmp_path) == 0
        summary = json.loads((tmp_path / "phase_summary.json").read_text())
        assert len(summary["fringes"]) == 4
        assert len(summary["phase_differences"]) == 2
        diff = {d["target"]: d for d in summary["phase_differences"]}
        assert diff["psi_plus"]["pi_difference"]
        rows = read_csv(tmp_path / "phase_fringes.csv")
        assert rows[0] == ["phase_rad", "p_f", "target", "direction", "j_min"]
        assert len(rows) == 1 + 4 * 11

    def test_grid_rows(self, tmp_path):
        cfg = write(tmp_path, PHASE.format(grid="[-1.0, 0.0, 1.0]", dirs='["cw"]'))
        assert run("phase", cfg, tmp_path) == 0
        summary = json.loads((tmp_path / "phase_summary.json").read_text())
        keys = {(f["j_min"], f["direction"], f["target"]) for f in summary["fringes"]}
        assert len(keys) == 6
        assert summary["phase_differences"] == []
        for f in summary["fringes"]:
            assert {"direction", "target", "contrast", "chi_rad", "offset", "reliable"} <= set(f)

    def test_fig2_preset_flags_pi(self, tmp_path):
        assert run("phase", "fig2", tmp_path) == 0
        summary = json.loads((tmp_path / "phase_summary.json").read_text())
        near_zero = [d for d in summary["phase_differences"]
                     if d["target"] == "psi_plus" and abs(d["j_min"]) <= 0.5]
        assert near_zero and all(d["pi_difference"] for d in near_zero)


TRANSFER = """experiment = "transfer_map"
engine = "nh"
[loop]
j_max = 30.0
j_min = 0.3
delta_amp = 31.41592653589793
period_us = 1.5
[rates]
gamma_e = {gamma}
[transfer_map]
j_min = {j}
period_us = {t}
directions = ["ccw", "cw"]
"""


class TestTransferMap:
    def test_single_cell(self, tmp_path):
        cfg = write(tmp_path, TRANSFER.format(gamma=6.2, j="[0.3]", t="[1.5]").replace(
            '["ccw", "cw"]', '["ccw"]'))
        assert run("transfer-map", cfg, tmp_path) == 0
        rows = read_csv(tmp_path / "transfer_map.csv")
        assert rows[0] == ["j_min", "period_us", "direction", "p_psi_minus", "survival", "error"]
        assert len(rows) == 2 and float(rows[1][3]) <= 0.2

    def test_deterministic_and_parallel_invariant(self, tmp_path, monkeypatch):
        cfg = write(tmp_path, TRANSFER.format(gamma=6.2, j="[0.3, 3.0, 6.0]", t="[0.2, 0.6]"))
        assert run("transfer-map", cfg, tmp_path / "a", "--jobs", "1") == 0
        assert run("transfer-map", cfg, tmp_path / "b", "--jobs", "1") == 0
        monkeypatch.setenv("EPSIM_JOBS", "3")
        assert run("transfer-map", cfg, tmp_path / "c") == 0
        names = ["transfer_map.csv", "transfer_map_ccw_heatmap.csv", "transfer_map_cw_heatmap.csv"]
        for name in names:
            blobs = {(tmp_path / d / name).read_bytes() for d in "abc"}
            assert len(blobs) == 1
        assert json.loads((tmp_path / "c" / "manifest.json").read_text())["config"]["parallel"]["jobs"] == 3
        rows = read_csv(tmp_path / "a" / "transfer_map.csv")[1:]
        keys = [(r[2], float(r[0]), float(r[1])) for r in rows]
        assert keys == sorted(keys) and len(rows) == 12
        heat = read_csv(tmp_path / "a" / "transfer_map_cw_heatmap.csv")
        assert len(heat) == 4 and len(heat[0]) == 3

    def test_failed_cells_are_written(self, tmp_path):
        cfg = write(tmp_path, TRANSFER.format(gamma=100.0, j="[0.3]", t="[0.1, 20.0]"))
        assert run("transfer-map", cfg, tmp_path) == 0
        rows = read_csv(tmp_path / "transfer_map.csv")[1:]
        failed = [r for r in rows if r[5]]
        assert len(failed) == 2 and all(math.isnan(float(r[3])) for r in failed)
        assert json.loads((tmp_path / "manifest.json").read_text())["metadata"]["failed_cells"] == 2

    def test_bad_env_jobs(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EPSIM_JOBS", "many")
        assert run("transfer-map", "fig3", tmp_path) == 2


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "epsim.cli", "encircle", "--config", "fig3"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 2 and "config error" in proc.stderr


def test_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert run("spectrum", "spectrum", blocker / "sub") == 1
