"""Wavepacket dynamical-scar simulator for the desymmetrized stadium billiard."""

from .analysis import (
    SmoothedSpectrum,
    WindowModelParams,
    delta_bar,
    delta_lorentz,
    measured_window,
    model_window,
    peak_spacing,
    poisson_sum_check,
    smoothed_green_diag,
    smoothed_histogram,
    swsf,
)
from .classical import (
    PRESETS,
    Monodromy,
    PeriodicOrbit,
    conjugate_points,
    find_periodic_orbit,
    lyapunov,
    monodromy_at,
    preset_orbit,
    trace,
)
from .dynamics import (
    AveragedField,
    CrankNicolson,
    ExpansionCoeffs,
    WavepacketParams,
    autocorrelation,
    evolve_crank_nicolson,
    evolve_spectral,
    expand,
    free_space_oracle,
    make_gaussian,
    time_average,
)
from .geometry import Domain, Grid, area_quadrature, build_grid, contains
from .pipeline import RunConfig, run_pipeline
from .semiclassics import ScarProfile, a_osc, scar_profile, smooth_term
from .spectral import (
    EigenBasis,
    mean_level_spacing,
    solve_eigensystem,
    weyl_count,
)

__version__ = "0.1.0"
