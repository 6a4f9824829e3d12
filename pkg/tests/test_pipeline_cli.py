import json
import math
import subprocess
import sys

import numpy as np
import pytest

from scarsim.analysis import read_coeffs_csv, read_spectra_csv
from scarsim.dynamics import read_field
from scarsim.geometry import read_grid
from scarsim.pipeline import (
    ConfigError,
    RunConfig,
    boundary_distance,
    off_orbit_control,
)
from scarsim.semiclassics import read_profile_csv

SMOKE = ["--preset", "No7", "--p0", "14", "--sigma0", "0.18"]


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "scarsim", *args],
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def smoke_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "no7_small"
    proc = run_cli("run", *SMOKE, "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    return out


# --- config resolution ----------------------------------------------------------


def test_preset_fills_launch():
    cfg = RunConfig(preset="No14").resolved()
    assert cfg.start == (0.25, 0.5)
    assert cfg.angle == pytest.approx(math.atan(2.0))


def test_auto_cutoff_and_spacing():
    cfg = RunConfig(preset="No7", p0=60.0, sigma0=0.15).resolved()
    assert cfg.e_max == pytest.approx(1800 + 4 * 60 / 0.15)
    k_top = math.sqrt(2 * cfg.e_max)
    assert cfg.h <= min(0.5 / k_top, 0.3 / 60.0) + 1e-12
    assert (1.0 / cfg.h) == pytest.approx(round(1.0 / cfg.h))


def test_cartesian_momentum_override():
    cfg = RunConfig(preset="No7", px=30.0, py=40.0).resolved()
    assert cfg.p0 == pytest.approx(50.0)
    assert cfg.angle == pytest.approx(math.atan2(40, 30))


def test_paper_scale_preset():
    cfg = RunConfig(preset="No7", scale="paper").resolved()
    assert cfg.p0 == 250.0
    assert cfg.dt == 2.5e-2
    assert cfg.T == 9.0e4


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError, match="preset"):
        RunConfig(preset="No99").resolved()


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        RunConfig.from_dict({"nonsense": 1})


def test_rectangle_domain_parse():
    cfg = RunConfig(domain="rectangle:2:1", preset=None, start=(1.0, 0.5), angle=0.3)
    dom = cfg.domain_object()
    assert dom.width == 2.0 and dom.height == 1.0
    with pytest.raises(ConfigError):
        RunConfig(domain="hexagon").domain_object()


def test_explicit_launch_without_preset():
    cfg = RunConfig(preset=None, start=(0.5, 0.5), angle=-math.pi / 4).resolved()
    assert cfg.start == (0.5, 0.5)


def test_missing_launch_rejected():
    with pytest.raises(ConfigError, match="preset or explicit"):
        RunConfig(preset=None).resolved()


def test_boundary_distance_quarter_stadium():
    from scarsim.geometry import Domain
    dom = Domain.quarter_stadium()
    assert boundary_distance(dom, 0.1, 0.5) == pytest.approx(0.1)
    assert boundary_distance(dom, 0.5, 0.93) == pytest.approx(0.07)
    assert boundary_distance(dom, 1.5, 0.2) == pytest.approx(0.2)
    r = math.hypot(0.5, 0.6)
    assert boundary_distance(dom, 1.5, 0.6) == pytest.approx(1 - r)


def test_off_orbit_control_respects_margins(qs_small):
    from scarsim.classical import preset_orbit
    orbit = preset_orbit("No7")
    grid = qs_small["grid"]
    pts = off_orbit_control(grid, orbit, n_points=64, seed=3)
    assert len(pts) == 64
    dom = grid.domain
    dense = np.array([orbit.point_at(s)
                      for s in np.linspace(0, orbit.length, 2048, endpoint=False)])
    for x, y in pts:
        assert dom.strictly_inside(x, y)
        assert boundary_distance(dom, x, y) >= 0.1 - 1e-12
        d = np.min(np.hypot(dense[:, 0] - x, dense[:, 1] - y))
        assert d >= 0.2 - 1e-9


# --- CLI smoke -------------------------------------------------------------------


def test_run_emits_all_artifacts(smoke_dir):
    for name in ("grid.scargrid", "orbit.json", "energies.csv", "coeffs.csv",
                 "average.scarfield", "autocorr.csv", "spectra.csv",
                 "profile.csv", "summary.json", "config.json"):
        assert (smoke_dir / name).exists(), name


def test_run_artifacts_parse(smoke_dir):
    grid = read_grid(smoke_dir / "grid.scargrid")
    header, dens, real = read_field(smoke_dir / "average.scarfield", grid)
    assert real
    assert dens.sum() * grid.h ** 2 == pytest.approx(1.0, abs=0.02)
    energies, c = read_coeffs_csv(smoke_dir / "coeffs.csv")
    assert np.sum(np.abs(c) ** 2) > 0.95
    spectra = read_spectra_csv(smoke_dir / "spectra.csv")
    assert {"p_eps", "window_measured", "window_model",
            "smoothed_histogram"} <= set(spectra)
    prof = read_profile_csv(smoke_dir / "profile.csv")
    assert len(prof["xi"]) == 512
    summary = json.loads((smoke_dir / "summary.json").read_text())
    assert summary["orbit_label"] == "No7"
    assert summary["completeness"] > 0.95


def test_run_echoes_config(smoke_dir):
    cfg = json.loads((smoke_dir / "config.json").read_text())
    assert cfg["p0"] == 14.0
    assert cfg["sigma0"] == 0.18
    assert cfg["h"] is not None and cfg["e_max"] is not None


def test_run_is_deterministic(smoke_dir, tmp_path):
    out2 = tmp_path / "again"
    proc = run_cli("run", *SMOKE, "--out", str(out2))
    assert proc.returncode == 0, proc.stderr
    for name in ("grid.scargrid", "energies.csv", "coeffs.csv",
                 "average.scarfield", "spectra.csv", "profile.csv",
                 "summary.json", "config.json", "orbit.json", "autocorr.csv"):
        assert (smoke_dir / name).read_bytes() == (out2 / name).read_bytes(), name


def test_stream_average_pipeline_path(tmp_path):
    # explicit time-stepped averaging instead of the closed form
    from scarsim.pipeline import run_pipeline

    cfg = RunConfig(preset="No7", p0=12.0, sigma0=0.17, average="stream",
                    T=0.5, dt=0.01)
    result = run_pipeline(cfg, tmp_path / "stream")
    assert result.averaged.n_samples == 50
    assert result.averaged.total_mass() == pytest.approx(1.0, abs=0.02)
    assert np.all(result.averaged.values >= 0)


def test_orbit_subcommand(tmp_path):
    proc = run_cli("orbit", "--preset", "No14", "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    data = json.loads((tmp_path / "orbit.json").read_text())
    assert data["L"] == pytest.approx(6.47, abs=1e-2)


def test_grid_subcommand(tmp_path):
    proc = run_cli("grid", "--h", "0.05", "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    grid = read_grid(tmp_path / "grid.scargrid")
    assert grid.h == 0.05


def test_eigs_subcommand(tmp_path):
    proc = run_cli("eigs", "--domain", "rectangle:1:1", "--h", "0.05",
                   "--e-max", "120", "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    from scarsim.geometry import Domain
    from scarsim.spectral import read_basis
    grid = read_grid(tmp_path / "grid.scargrid", Domain.rectangle(1, 1))
    basis = read_basis(tmp_path / "basis.scarbasis", grid)
    assert basis.energies[0] == pytest.approx(math.pi ** 2, rel=0.01)


def test_spectrum_subcommand(smoke_dir, tmp_path):
    out = tmp_path / "respec.csv"
    proc = run_cli("spectrum", "--indir", str(smoke_dir), "--out-file", str(out))
    assert proc.returncode == 0, proc.stderr
    spectra = read_spectra_csv(out)
    assert "p_eps" in spectra


def test_profile_subcommand(smoke_dir, tmp_path):
    out = tmp_path / "reprof.csv"
    proc = run_cli("profile", "--indir", str(smoke_dir), "--out-file", str(out))
    assert proc.returncode == 0, proc.stderr
    prof = read_profile_csv(out)
    assert np.isfinite(prof["A_num"]).all()


def test_check_subcommand():
    proc = run_cli("check")
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "PASS" in proc.stdout
    assert "FAIL" not in proc.stdout


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    proc = run_cli("run", "--config", str(bad), "--out", str(tmp_path / "x"))
    assert proc.returncode == 2
    assert "error 2" in proc.stderr


def test_solver_error_exit_code(tmp_path):
    proc = run_cli("eigs", "--domain", "rectangle:1:1", "--h", "0.05",
                   "--e-max", "1", "--out", str(tmp_path))
    assert proc.returncode == 3
    assert "error 3" in proc.stderr


def test_missing_input_exit_code(tmp_path):
    proc = run_cli("spectrum", "--indir", str(tmp_path))
    assert proc.returncode == 2


def test_config_file_with_flag_override(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"preset": "No7", "p0": 14.0, "sigma0": 0.25}))
    out = tmp_path / "run"
    proc = run_cli("orbit", "--config", str(cfg_path), "--preset", "No12",
                   "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    data = json.loads((out / "orbit.json").read_text())
    assert data["label"] == "No12"
