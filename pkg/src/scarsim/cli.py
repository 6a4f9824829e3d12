"""Command-line driver for the scar pipeline.

Subcommands mirror the pipeline stages: grid | eigs | run | spectrum |
orbit | profile | check.  A JSON config file supplies defaults; flags
override file values.  Exit codes: 0 ok, 2 config error, 3 solver error,
4 analysis error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import analysis, classical, dynamics, geometry, semiclassics, spectral
from .pipeline import ConfigError, RunConfig, run_pipeline

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_ANALYSIS = 4


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run config; flags override it")
    p.add_argument("--preset", choices=sorted(classical.PRESETS), default=None)
    p.add_argument("--domain", default=None,
                   help="quarter_stadium (default) or rectangle:W:H")
    p.add_argument("--start", type=float, nargs=2, metavar=("X", "Y"), default=None)
    p.add_argument("--angle", type=float, default=None, help="launch angle, radians ccw")
    p.add_argument("--angle-deg", type=float, default=None, help="launch angle, degrees")
    p.add_argument("--p0", type=float, default=None, help="momentum magnitude")
    p.add_argument("--px", type=float, default=None, help="Cartesian momentum x")
    p.add_argument("--py", type=float, default=None, help="Cartesian momentum y")
    p.add_argument("--sigma0", type=float, default=None, help="packet width")
    p.add_argument("--h", type=float, default=None, help="solver grid spacing")
    p.add_argument("--e-max", type=float, default=None, help="basis energy cutoff")
    p.add_argument("--epsilon", type=float, default=None,
                   help="Lorentzian width (default: mean level spacing)")
    p.add_argument("--scale", choices=["desk", "paper"], default=None,
                   help="paper scale (|p0|=250) is expensive; desk is default")
    p.add_argument("--write-basis", action="store_true", default=None,
                   help="also write the full SCARBASIS file (large)")
    p.add_argument("--out", type=Path, default=Path("runs/out"),
                   help="output directory")


def _config_from_args(args) -> RunConfig:
    data = {}
    if args.config is not None:
        cfg = RunConfig.from_file(args.config)
        data = asdict(cfg)
    overrides = {
        "preset": args.preset,
        "domain": args.domain,
        "start": tuple(args.start) if args.start is not None else None,
        "angle": args.angle,
        "p0": args.p0,
        "px": args.px,
        "py": args.py,
        "sigma0": args.sigma0,
        "h": args.h,
        "e_max": args.e_max,
        "epsilon": args.epsilon,
        "scale": args.scale,
        "write_basis": args.write_basis,
    }
    if args.angle_deg is not None:
        overrides["angle"] = math.radians(args.angle_deg)
    for key, val in overrides.items():
        if val is not None:
            data[key] = val
    if args.preset is not None:
        # an explicit preset on the command line resets stale launch data
        if args.start is None:
            data.pop("start", None)
        if args.angle is None and args.angle_deg is None:
            data.pop("angle", None)
    return RunConfig.from_dict(data)


def cmd_grid(args) -> int:
    cfg = _config_from_args(args).resolved()
    grid = geometry.build_grid(cfg.domain_object(), cfg.h)
    args.out.mkdir(parents=True, exist_ok=True)
    geometry.write_grid(args.out / "grid.scargrid", grid)
    print(f"grid {grid.nx}x{grid.ny} h={grid.h!r} interior={grid.n_interior} "
          f"-> {args.out / 'grid.scargrid'}")
    return 0


def cmd_eigs(args) -> int:
    cfg = _config_from_args(args).resolved()
    grid = geometry.build_grid(cfg.domain_object(), cfg.h)
    basis = spectral.solve_eigensystem(grid, cfg.e_max)
    args.out.mkdir(parents=True, exist_ok=True)
    geometry.write_grid(args.out / "grid.scargrid", grid)
    spectral.write_energies_csv(args.out / "energies.csv", basis.energies)
    spectral.write_basis(args.out / "basis.scarbasis", basis)
    print(f"{basis.n_states} states up to E={cfg.e_max!r} -> {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    result = run_pipeline(cfg, args.out)
    s = result.summary
    print(f"run complete -> {args.out}")
    print(f"  states={s['n_states']} completeness={s['completeness']:.6f}")
    if s["delta_measured"] is not None:
        print(f"  delta_measured={s['delta_measured']:.4g} "
              f"delta_theory={s['delta_theory']:.4g} "
              f"deviation={100 * s['delta_relative_deviation']:.2f}%")
    print(f"  pearson_r={s['pearson_r']:.3f} on/off={s['on_off_ratio']:.3f}")
    return 0


def cmd_spectrum(args) -> int:
    indir = args.indir
    energies, c = analysis.read_coeffs_csv(indir / "coeffs.csv")
    abs2 = np.abs(c) ** 2
    eps = args.epsilon
    if eps is None:
        window = (energies[0], energies[-1])
        eps = spectral.mean_level_spacing(energies, window)
    e_grid = analysis.default_e_grid(energies[0], energies[-1], eps, pad=50.0)
    spectra = [
        analysis.swsf(abs2, energies, eps, e_grid),
        analysis.measured_window(abs2, energies, eps, e_grid),
        analysis.smoothed_histogram(abs2, energies, 20.0 * eps, e_grid),
    ]
    out = args.out_file or (indir / "spectra.csv")
    analysis.write_spectra_csv(out, spectra)
    print(f"spectra ({', '.join(s.kind for s in spectra)}) -> {out}")
    return 0


def cmd_orbit(args) -> int:
    cfg = _config_from_args(args).resolved()
    if cfg.preset is not None:
        orbit = classical.preset_orbit(cfg.preset, cfg.domain_object())
    else:
        orbit = classical.find_periodic_orbit(cfg.domain_object(), cfg.start, cfg.angle)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "orbit.json"
    classical.write_orbit(path, orbit)
    print(f"orbit {orbit.label or 'custom'}: L={orbit.length:.6f} "
          f"N_C={orbit.n_hits} mu1={orbit.mu1:.6f} nu={orbit.nu} -> {path}")
    return 0


def cmd_profile(args) -> int:
    indir = args.indir
    with open(indir / "summary.json") as f:
        summary = json.load(f)
    grid = geometry.read_grid(indir / "grid.scargrid")
    header, full, real = dynamics.read_field(indir / "average.scarfield", grid)
    if not real:
        raise analysis.AnalysisError("profile needs a REAL density field")
    orbit_data = classical.read_orbit(indir / "orbit.json")
    cfg = RunConfig.from_file(indir / "config.json").resolved()
    grid.domain = cfg.domain_object()
    orbit = classical.find_periodic_orbit(
        grid.domain, tuple(orbit_data["start"]), orbit_data["angle"],
        label=orbit_data["label"], xi_origin=tuple(orbit_data["xi_origin"]))
    averaged = dynamics.AveragedField(values=grid.from_field(full), grid=grid,
                                      T=math.inf, n_samples=0, dt=0.0)
    window = analysis.WindowModelParams(
        e_p=summary["e_p"], delta=summary["delta_measured"], lam=summary["lambda"],
        sigma0=cfg.sigma0, v=cfg.p0, e0=0.5 * cfg.p0 ** 2,
        epsilon=summary["epsilon"])
    profile = semiclassics.scar_profile(orbit, averaged, window)
    out = args.out_file or (indir / "profile.csv")
    semiclassics.write_profile_csv(out, profile)
    print(f"profile pearson_r={profile.pearson_r():.3f} -> {out}")
    return 0


def cmd_check(args) -> int:
    """Internal oracle suite; prints a pass/fail table."""
    rows: list[tuple[str, bool, str]] = []

    eps, x = 0.37, 1.234
    lhs = 2 * math.pi * eps * float(analysis.delta_lorentz(x, eps)) ** 2
    rhs = float(analysis.delta_bar(x, eps))
    rows.append(("delta-bar identity", abs(lhs - rhs) < 1e-15, f"|lhs-rhs|={abs(lhs - rhs):.2e}"))

    from scipy.integrate import quad
    val, _ = quad(lambda u: float(analysis.delta_bar(u, eps)), -np.inf, np.inf)
    rows.append(("delta-bar normalization", abs(val - 1) < 1e-9, f"integral={val:.12f}"))

    params = analysis.WindowModelParams(e_p=0.0, delta=325.3, lam=104.5,
                                        sigma0=0.15, v=250.0, e0=31250.0,
                                        epsilon=3.412)
    diff = analysis.poisson_sum_check(params, np.linspace(-0.05, 0.05, 101),
                                      n_orbit_terms=80, n_comb_terms=6000)
    rows.append(("poisson resummation", diff < 1e-6, f"max diff={diff:.2e}"))

    orbit = classical.preset_orbit("No7")
    xs = np.linspace(0.0, 1 + math.sqrt(2), 25)
    worst = max(abs(classical.monodromy_at(orbit, float(s)).m12
                    - (-2 * ((2 + math.sqrt(2)) - s ** 2))) for s in xs)
    rows.append(("monodromy closed form", worst < 1e-6, f"max |err|={worst:.2e}"))

    grid = geometry.build_grid(geometry.Domain.rectangle(1, 1), 0.05)
    basis = spectral.solve_eigensystem(grid, e_max=120.0)
    packet = dynamics.WavepacketParams((0.45, 0.55), (3.0, 1.0), 0.18)
    psi0 = dynamics.make_gaussian(packet, grid)
    coeffs = dynamics.expand(basis, psi0)
    start = dynamics.evolve_spectral(basis, coeffs, 0.0)
    cn = dynamics.evolve_crank_nicolson(grid, start, 5e-5, 2000)
    sp = dynamics.evolve_spectral(basis, coeffs, 0.1)
    route_diff = grid.norm(cn - sp)
    rows.append(("spectral vs CN route", route_diff < 1e-4, f"L2 diff={route_diff:.2e}"))

    rng = np.random.default_rng(0)
    pts = rng.uniform((0, 0), (2, 1), size=(100_000, 2))
    dom = geometry.Domain.quarter_stadium()
    frac = dom.contains_mask(pts[:, 0], pts[:, 1]).mean()
    mc = 2 * frac
    sig = 2 * math.sqrt(frac * (1 - frac) / len(pts))
    quad_area = geometry.area_quadrature(geometry.build_grid(dom, 0.0025))
    rows.append(("area MC vs quadrature", abs(mc - quad_area) < 3 * sig,
                 f"mc={mc:.5f} quad={quad_area:.5f} 3sig={3 * sig:.5f}"))

    width = max(len(r[0]) for r in rows)
    ok = True
    for name, passed, detail in rows:
        ok &= passed
        print(f"{name:<{width}}  {'PASS' if passed else 'FAIL'}  {detail}")
    return 0 if ok else EXIT_ANALYSIS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scarsim",
        description="Wavepacket dynamical-scar simulator for the quarter stadium")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_text in [
        ("grid", cmd_grid, "build and write the masked grid"),
        ("eigs", cmd_eigs, "solve the eigenbasis and write basis + energies"),
        ("run", cmd_run, "full pipeline: grid, orbit, basis, packet, analysis, profile"),
        ("orbit", cmd_orbit, "trace a periodic orbit and write orbit.json"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("spectrum", help="recompute spectra from coeffs.csv")
    p.add_argument("--indir", type=Path, required=True,
                   help="run directory holding coeffs.csv")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--out-file", type=Path, default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("profile", help="recompute the orbit profile from a run dir")
    p.add_argument("--indir", type=Path, required=True)
    p.add_argument("--out-file", type=Path, default=None)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("check", help="run the internal oracle suite")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, geometry.GeometryError) as err:
        print(f"error {EXIT_CONFIG} (config): {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (spectral.SolverError, classical.TraceError) as err:
        print(f"error {EXIT_SOLVER} (solver): {err}", file=sys.stderr)
        return EXIT_SOLVER
    except (analysis.AnalysisError, semiclassics.SemiclassicsError) as err:
        print(f"error {EXIT_ANALYSIS} (analysis): {err}", file=sys.stderr)
        return EXIT_ANALYSIS
    except FileNotFoundError as err:
        print(f"error {EXIT_CONFIG} (config): missing input {err.filename}",
              file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
