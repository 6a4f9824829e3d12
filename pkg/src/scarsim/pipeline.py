"""End-to-end run pipeline: grid -> eigenbasis -> packet -> analysis -> profile.

A run is described by a RunConfig (JSON-serializable; CLI flags override
file values).  The desk scale (|p0| = 60) is the default; the "paper"
scale preset (|p0| = 250, dt = 2.5e-2, T = 9e4) needs hours of
eigensolver time and is meant for full-resolution reproduction runs.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import analysis, classical, dynamics, geometry, semiclassics, spectral

DESK_P0 = 60.0
PAPER_P0 = 250.0


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Fully describes one simulation run.

    Angles are radians, counterclockwise from +x.  Momentum is given as
    magnitude + angle (Cartesian px/py accepted as an alternative).  h and
    e_max default to automatic rules: e_max = E0 + 4 v / sigma0 and
    h = min(0.5 / k_top, 0.3 / k0) snapped to 1/m.
    """

    domain: str = "quarter_stadium"          # or "rectangle:W:H"
    preset: str | None = "No7"
    start: tuple[float, float] | None = None
    angle: float | None = None
    p0: float = DESK_P0
    px: float | None = None
    py: float | None = None
    sigma0: float = 0.15
    h: float | None = None
    e_max: float | None = None
    dt: float = 2.5e-2
    T: float = 9.0e4
    sample_stride: int = 1
    average: str = "closed_form"             # or "stream"
    epsilon: float | None = None             # default: mean level spacing
    epsilon_scale: float = 1.0
    histogram_width_epsilons: float = 20.0
    autocorr_periods: float = 6.0
    autocorr_samples: int = 2048
    profile_samples: int = 512
    write_basis: bool = False
    scale: str = "desk"
    seed: int = 2024

    def resolved(self) -> "RunConfig":
        cfg = replace(self)
        if cfg.scale == "paper":
            cfg.p0 = PAPER_P0
            cfg.dt = 2.5e-2
            cfg.T = 9.0e4
        elif cfg.scale != "desk":
            raise ConfigError(f"unknown scale {cfg.scale!r}")
        if cfg.preset is not None:
            if cfg.preset not in classical.PRESETS:
                raise ConfigError(f"unknown preset {cfg.preset!r}")
            spec = classical.PRESETS[cfg.preset]
            if cfg.start is None:
                cfg.start = spec["start"]
            if cfg.angle is None:
                cfg.angle = spec["angle"]
        if cfg.start is None or cfg.angle is None:
            raise ConfigError("need an orbit preset or explicit start + angle")
        if cfg.px is not None or cfg.py is not None:
            if cfg.px is None or cfg.py is None:
                raise ConfigError("Cartesian momentum needs both px and py")
            cfg.p0 = math.hypot(cfg.px, cfg.py)
            cfg.angle = math.atan2(cfg.py, cfg.px)
        if cfg.sigma0 <= 0 or cfg.p0 <= 0:
            raise ConfigError("sigma0 and p0 must be positive")
        packet = self_packet(cfg)
        if cfg.e_max is None:
            cfg.e_max = packet.e0 + 4.0 * packet.speed / packet.sigma0
        if cfg.h is None:
            k_top = math.sqrt(2.0 * cfg.e_max)
            k0 = packet.speed
            h_raw = min(0.5 / k_top, 0.3 / k0)
            cfg.h = 1.0 / math.ceil(1.0 / h_raw)
        return cfg

    def domain_object(self) -> geometry.Domain:
        if self.domain == "quarter_stadium":
            return geometry.Domain.quarter_stadium()
        if self.domain.startswith("rectangle:"):
            try:
                _, w, h = self.domain.split(":")
                return geometry.Domain.rectangle(float(w), float(h))
            except (ValueError, geometry.GeometryError) as err:
                raise ConfigError(f"bad rectangle spec {self.domain!r}: {err}")
        raise ConfigError(f"unknown domain {self.domain!r}")

    @staticmethod
    def from_file(path) -> "RunConfig":
        try:
            with open(path) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}")
        return RunConfig.from_dict(data)

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        allowed = {f.name for f in RunConfig.__dataclass_fields__.values()}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "start" in data and data["start"] is not None:
            data = {**data, "start": tuple(data["start"])}
        return RunConfig(**data)

    def echo(self, path) -> None:
        data = asdict(self)
        with open(path, "w") as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write("\n")


def self_packet(cfg: RunConfig) -> dynamics.WavepacketParams:
    return dynamics.WavepacketParams.from_polar(cfg.start, cfg.p0, cfg.angle,
                                                cfg.sigma0)


@dataclass
class RunResult:
    config: RunConfig
    grid: geometry.Grid
    basis: spectral.EigenBasis
    orbit: classical.PeriodicOrbit
    packet: dynamics.WavepacketParams
    coeffs: dynamics.ExpansionCoeffs
    averaged: dynamics.AveragedField
    spectra: dict[str, analysis.SmoothedSpectrum]
    window: analysis.WindowModelParams
    profile: semiclassics.ScarProfile
    summary: dict


def build_run_grid(cfg: RunConfig) -> geometry.Grid:
    return geometry.build_grid(cfg.domain_object(), cfg.h)


def find_run_orbit(cfg: RunConfig) -> classical.PeriodicOrbit:
    if cfg.preset is not None:
        return classical.preset_orbit(cfg.preset, cfg.domain_object())
    return classical.find_periodic_orbit(cfg.domain_object(), cfg.start, cfg.angle)


def envelope_window(packet: dynamics.WavepacketParams,
                    widths: float = 4.0) -> tuple[float, float]:
    w = packet.speed / packet.sigma0
    return max(0.0, packet.e0 - widths * w), packet.e0 + widths * w


def off_orbit_control(grid: geometry.Grid, orbit: classical.PeriodicOrbit,
                      n_points: int = 512, orbit_margin: float = 0.2,
                      wall_margin: float = 0.1, seed: int = 2024) -> np.ndarray:
    """Deterministic interior control points away from orbit and walls."""
    rng = np.random.default_rng(seed)
    dense_xi = np.linspace(0, orbit.length, 2048, endpoint=False)
    dense = np.array([orbit.point_at(s) for s in dense_xi])
    dom = grid.domain
    x0, y0, x1, y1 = dom.bounding_box
    out = []
    while len(out) < n_points:
        cand = rng.uniform((x0, y0), (x1, y1), size=(4 * n_points, 2))
        for cx, cy in cand:
            if not dom.strictly_inside(cx, cy):
                continue
            if boundary_distance(dom, cx, cy) < wall_margin:
                continue
            d2 = np.min((dense[:, 0] - cx) ** 2 + (dense[:, 1] - cy) ** 2)
            if d2 < orbit_margin ** 2:
                continue
            out.append((cx, cy))
            if len(out) == n_points:
                break
    return np.asarray(out)


def boundary_distance(dom: geometry.Domain, x: float, y: float) -> float:
    """Distance to the nearest wall (exact on every boundary piece)."""
    if dom.kind == geometry.RECTANGLE:
        return min(x, dom.width - x, y, dom.height - y)
    cands = [x, y]
    if x <= 1.0:
        cands.append(1.0 - y)
    r = math.hypot(x - 1.0, y)
    if x >= 1.0:
        cands.append(1.0 - r)
    else:
        # nearest arc point is its (1,1) endpoint when the foot leaves the arc
        cands.append(math.hypot(x - 1.0, y - 1.0))
    return min(cands)


def run_pipeline(cfg: RunConfig, outdir,
                 basis: spectral.EigenBasis | None = None) -> RunResult:
    """Execute every stage and write the declared artifacts into outdir.

    A precomputed basis (from an earlier run with the same grid and
    cutoff) may be passed to skip the eigensolve, e.g. when launching
    several packets against one spectrum.
    """
    cfg = cfg.resolved()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    if basis is not None:
        grid = basis.grid
        if abs(grid.h - cfg.h) > 1e-12 or basis.e_cutoff < cfg.e_max - 1e-9:
            raise spectral.SolverError(
                "precomputed basis does not match the run config (h or e_max)")
    else:
        grid = build_run_grid(cfg)
    geometry.write_grid(outdir / "grid.scargrid", grid)
    timings["grid_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    orbit = find_run_orbit(cfg)
    classical.write_orbit(outdir / "orbit.json", orbit)
    timings["orbit_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if basis is None:
        basis = spectral.solve_eigensystem(grid, cfg.e_max)
    spectral.write_energies_csv(outdir / "energies.csv", basis.energies)
    if cfg.write_basis:
        spectral.write_basis(outdir / "basis.scarbasis", basis)
    timings["eigensolve_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    packet = self_packet(cfg)
    psi0 = dynamics.make_gaussian(packet, grid)
    coeffs = dynamics.expand(basis, psi0)
    analysis.write_coeffs_csv(outdir / "coeffs.csv", basis.energies, coeffs.c)

    if cfg.average == "stream":
        n_t = int(round(cfg.T / cfg.dt))
        stride = max(1, cfg.sample_stride)
        times_avg = cfg.dt * stride * np.arange(n_t // stride)
        stream = (dynamics.evolve_spectral(basis, coeffs, t) for t in times_avg)
        averaged = dynamics.time_average(stream=stream, dt=cfg.dt * stride, grid=grid)
    else:
        averaged = dynamics.time_average(basis=basis, coeffs=coeffs)
    dynamics.write_field(outdir / "average.scarfield", grid, averaged.values)

    tau = orbit.length / packet.speed
    t_ac = np.linspace(0.0, cfg.autocorr_periods * tau, cfg.autocorr_samples)
    c_ac = dynamics.autocorrelation_modes(coeffs, basis.energies, t_ac)
    dynamics.write_timeseries_csv(outdir / "autocorr.csv", t_ac, c_ac)
    timings["dynamics_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    win_lo, win_hi = envelope_window(packet)
    spacing = spectral.mean_level_spacing(basis, (win_lo, win_hi))
    eps = cfg.epsilon if cfg.epsilon is not None else spacing * cfg.epsilon_scale

    e_grid = analysis.default_e_grid(win_lo, win_hi, eps, pad=50.0, step_frac=6.0)
    abs2 = coeffs.abs2
    p_eps = analysis.swsf(abs2, basis.energies, eps, e_grid)
    w_meas = analysis.measured_window(abs2, basis.energies, eps, e_grid)

    # comb anchor: tallest measured peak inside the envelope support
    support = np.abs(e_grid - packet.e0) <= 2.5 * packet.speed / packet.sigma0
    e_p = float(e_grid[support][np.argmax(p_eps.values[support])])
    delta_th = 2.0 * math.pi * packet.speed / orbit.length

    lyap = classical.lyapunov(orbit)
    lam = spacing if lyap.marginal else lyap.rate(packet.speed)

    def _maybe_spacing(spectrum):
        try:
            return analysis.peak_spacing(spectrum)
        except analysis.AnalysisError:
            return None

    # recurrence teeth carry intrinsic width lam/2, so their spacing is
    # measured on a spectrum smoothed at that scale; individual levels
    # inside one tooth would otherwise dominate the gap statistics
    eps_peak = max(eps, lam / 2.0)
    p_peak = p_eps if eps_peak == eps else analysis.swsf(abs2, basis.energies,
                                                         eps_peak, e_grid)
    delta_measured = _maybe_spacing(p_peak)

    model_params = analysis.WindowModelParams(
        e_p=e_p, delta=delta_th, lam=lam, sigma0=packet.sigma0,
        v=packet.speed, e0=packet.e0, epsilon=eps)
    w_model = analysis.model_window(model_params, e_grid)
    hist = analysis.smoothed_histogram(abs2, basis.energies,
                                       cfg.histogram_width_epsilons * eps, e_grid)
    spectra = {s.kind: s for s in (p_eps, w_meas, w_model, hist)}
    analysis.write_spectra_csv(outdir / "spectra.csv", list(spectra.values()))

    # the boxcar histogram is piecewise constant, so its peaks are read at
    # the histogram's own resolution; finer grids resolve per-level steps
    hist_width = cfg.histogram_width_epsilons * eps
    hist_coarse = analysis.smoothed_histogram(
        abs2, basis.energies, hist_width,
        np.arange(win_lo, win_hi, hist_width / 4.0))
    hist_spacing = _maybe_spacing(hist_coarse)
    model_spacing = _maybe_spacing(w_model)
    timings["analysis_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    profile_window = replace_window(
        model_params, delta=delta_measured if delta_measured else delta_th)
    profile = semiclassics.scar_profile(orbit, averaged, profile_window,
                                        n_samples=cfg.profile_samples)
    semiclassics.write_profile_csv(outdir / "profile.csv", profile)

    keep = ~profile.excluded
    on_mean = float(np.mean(profile.a_num[keep]))
    controls = off_orbit_control(grid, orbit, seed=cfg.seed)
    off_vals = grid.sample(averaged.values, controls).real
    off_mean = float(np.mean(off_vals))
    timings["profile_s"] = time.perf_counter() - t0

    summary = {
        "config_scale": cfg.scale,
        "h": grid.h,
        "n_interior": grid.n_interior,
        "e_max": cfg.e_max,
        "n_states": basis.n_states,
        "completeness": coeffs.completeness,
        "mean_level_spacing": spacing,
        "epsilon": eps,
        "orbit_label": orbit.label,
        "orbit_length": orbit.length,
        "orbit_mu1": orbit.mu1,
        "orbit_nu": orbit.nu,
        "u_geometric": orbit.u_geometric,
        "lyapunov_marginal": lyap.marginal,
        "lambda": lam,
        "e_p": e_p,
        "epsilon_peak_measure": eps_peak,
        "delta_measured": delta_measured,
        "delta_theory": delta_th,
        "delta_relative_deviation":
            abs(delta_measured - delta_th) / delta_th if delta_measured else None,
        "histogram_width": cfg.histogram_width_epsilons * eps,
        "histogram_peak_spacing": hist_spacing,
        "model_peak_spacing": model_spacing,
        "smooth_term": profile.smooth,
        "pearson_r": _json_float(profile.pearson_r()),
        "on_orbit_mean": on_mean,
        "off_orbit_mean": off_mean,
        "on_off_ratio": on_mean / off_mean,
    }
    with open(outdir / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    # wall-clock diagnostics live outside the deterministic artifact set
    with open(outdir / "timings.json", "w") as f:
        json.dump(timings, f, indent=2, sort_keys=True)
        f.write("\n")
    summary["timings"] = timings
    cfg.echo(outdir / "config.json")

    return RunResult(config=cfg, grid=grid, basis=basis, orbit=orbit,
                     packet=packet, coeffs=coeffs, averaged=averaged,
                     spectra=spectra, window=profile_window, profile=profile,
                     summary=summary)


def _json_float(x: float):
    return x if math.isfinite(x) else None


def replace_window(params: analysis.WindowModelParams,
                   **kwargs) -> analysis.WindowModelParams:
    data = {k: getattr(params, k) for k in
            ("e_p", "delta", "lam", "sigma0", "v", "e0", "epsilon")}
    data.update(kwargs)
    return analysis.WindowModelParams(**data)
