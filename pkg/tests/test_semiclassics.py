import math

import numpy as np
import pytest

from scarsim.analysis import WindowModelParams
from scarsim.classical import conjugate_points, monodromy_at, preset_orbit
from scarsim.dynamics import AveragedField
from scarsim.geometry import Domain, build_grid
from scarsim.semiclassics import (
    SemiclassicsError,
    a_osc,
    a_osc_comb_integral,
    read_profile_csv,
    scar_profile,
    smooth_term,
    write_profile_csv,
)


@pytest.fixture(scope="module")
def no7():
    return preset_orbit("No7")


def full_scale_window(orbit, delta=None, lam=None):
    v, sigma0, eps = 250.0, 0.15, 3.412
    e0 = 0.5 * v * v
    return WindowModelParams(
        e_p=e0,
        delta=delta if delta is not None else 2 * math.pi * v / orbit.length,
        lam=lam if lam is not None else orbit.u_geometric * v,
        sigma0=sigma0, v=v, e0=e0, epsilon=eps)


# --- smooth term ---------------------------------------------------------------


def test_smooth_term_quarter_stadium():
    assert smooth_term(Domain.quarter_stadium()) == pytest.approx(0.5601, abs=5e-5)


def test_smooth_term_unit_square():
    assert smooth_term(Domain.rectangle(1, 1)) == 1.0


def test_smooth_term_two_by_one():
    assert smooth_term(Domain.rectangle(2, 1)) == pytest.approx(0.5)


# --- oscillatory term -------------------------------------------------------------


def test_a_osc_positive_on_hyperbolic_orbits(no7):
    w = full_scale_window(no7)
    for xi in (0.3, 0.9, 1.2, 2.1, 3.1, 4.2):
        assert a_osc(no7, w, xi) > 0.0


def test_enhancement_at_least_ten_percent_at_paper_scale(no7):
    # away from conjugate points and walls the predicted on-orbit density
    # exceeds the ergodic background by >= 10% at full scale (v = 250)
    w = full_scale_window(no7)
    background = smooth_term(no7.domain)
    for xi in (1.2, 1.55, 2.1):
        assert a_osc(no7, w, xi) / background >= 0.10


def test_a_osc_diverges_at_conjugate_point(no7):
    w = full_scale_window(no7)
    xc = conjugate_points(no7)[0]
    near = a_osc(no7, w, xc - 1e-4)
    far = a_osc(no7, w, xc - 0.5)
    assert near > 10 * far
    # amplitude scales like |m12|^(-1/2)
    ratio = near / far
    m_near = abs(monodromy_at(no7, xc - 1e-4).m12)
    m_far = abs(monodromy_at(no7, xc - 0.5).m12)
    assert ratio == pytest.approx(math.sqrt(m_far / m_near), rel=1e-6)


def test_a_osc_errors_at_singularity(no7):
    w = full_scale_window(no7)
    xc = conjugate_points(no7)[0]
    with pytest.raises(SemiclassicsError, match="conjugate point"):
        a_osc(no7, w, xc)


def test_large_lyapunov_suppresses_enhancement(no7):
    w = full_scale_window(no7, lam=1e6)
    assert a_osc(no7, w, 1.0) < 1e-12


def test_mirror_symmetry_of_profile(no7):
    # self-retracing orbit: enhancement is symmetric under xi -> L - xi
    w = full_scale_window(no7)
    for xi in (0.4, 1.1, 1.6):
        assert a_osc(no7, w, xi) == pytest.approx(a_osc(no7, w, no7.length - xi),
                                                  rel=1e-9)


def test_comb_sum_close_to_integral_when_dense(no7):
    # Delta << v/sigma0: many comb teeth under the envelope
    w = full_scale_window(no7)
    assert w.delta < w.envelope_width / 4
    for xi in (0.8, 1.3):
        s = a_osc(no7, w, xi)
        i = a_osc_comb_integral(no7, w, xi)
        assert abs(s - i) / i < 0.01


def test_repetition_amplitude_ratio_logged(no7):
    # primitive-orbit dominance: |D_2| / |D_1| = 1/(mu1 + mu2) << 1
    m = monodromy_at(no7, 0.7)
    ratio = abs(m.d_n(2)) / abs(m.d_n(1))
    assert ratio == pytest.approx(1.0 / (no7.mu1 + no7.mu2), rel=1e-10)
    assert ratio < 0.15


# --- profiles ----------------------------------------------------------------------


def synthetic_average(orbit, window, grid):
    """Plant the semiclassical answer in a field to test the sampler."""
    sm = smooth_term(orbit.domain)
    x, y = grid.interior_points()
    vals = np.full(grid.n_interior, sm)
    xi = np.linspace(0, orbit.length, 800, endpoint=False)
    pts = np.array([orbit.point_at(s) for s in xi])
    for s, p in zip(xi, pts):
        try:
            amp = a_osc(orbit, window, s)
        except SemiclassicsError:
            continue
        amp = min(amp, 2.0 * sm)
        d2 = (x - p[0]) ** 2 + (y - p[1]) ** 2
        vals += amp * np.exp(-d2 / (2 * 0.03 ** 2)) * (orbit.length / len(xi)) \
            / (math.sqrt(2 * math.pi) * 0.03)
    return AveragedField(values=vals, grid=grid, T=math.inf, n_samples=0, dt=0.0)


@pytest.fixture(scope="module")
def planted_profile(no7):
    w = full_scale_window(no7)
    grid = build_grid(Domain.quarter_stadium(), 0.02)
    avg = synthetic_average(no7, w, grid)
    return scar_profile(no7, avg, w, n_samples=256)


def test_profile_marks_exclusions(planted_profile, no7):
    prof = planted_profile
    xc = conjugate_points(no7)[0]
    near_conj = np.abs(prof.xi - xc) < 0.19
    assert np.all(prof.excluded[near_conj])
    for wall_xi in no7.vertex_arclengths:
        near_wall = np.abs(prof.xi - wall_xi) < 0.09
        assert np.all(prof.excluded[near_wall])
    assert not np.all(prof.excluded)


def test_profile_correlates_with_planted_field(planted_profile):
    assert planted_profile.pearson_r() > 0.6


def test_profile_background_matches_smooth_term(planted_profile):
    # far from the orbit features the planted field sits at the smooth term
    prof = planted_profile
    keep = ~prof.excluded
    assert np.min(prof.a_num[keep]) > 0.9 * prof.smooth


def test_profile_semiclassical_floor_is_smooth_term(planted_profile):
    keep = ~planted_profile.excluded
    assert np.all(planted_profile.a_sc[keep] > planted_profile.smooth)


def test_profile_requires_grid_coverage(no7):
    w = full_scale_window(no7)
    grid = build_grid(Domain.rectangle(1, 1), 0.05)  # does not cover the orbit
    avg = AveragedField(values=np.ones(grid.n_interior), grid=grid, T=1.0,
                        n_samples=1, dt=1.0)
    with pytest.raises(SemiclassicsError, match="coverage"):
        scar_profile(no7, avg, w)


def test_profile_csv_roundtrip(tmp_path, planted_profile):
    path = tmp_path / "profile.csv"
    write_profile_csv(path, planted_profile)
    back = read_profile_csv(path)
    assert np.allclose(back["xi"], planted_profile.xi)
    finite = np.isfinite(planted_profile.a_sc)
    assert np.allclose(back["A_sc"][finite], planted_profile.a_sc[finite])
    assert np.array_equal(back["excluded"], planted_profile.excluded)


def test_profile_infinite_prediction_only_inside_exclusions(planted_profile):
    bad = ~np.isfinite(planted_profile.a_sc)
    assert np.all(planted_profile.excluded[bad])
