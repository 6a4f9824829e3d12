"""Semiclassical scar profile along a periodic orbit.

The time-averaged density on the orbit splits into a smooth background,
the inverse billiard area, plus an oscillatory enhancement fed by the
recurrence comb of the orbit:

    A(xi) = 1/Area + (2 sqrt2 / pi) (sigma0 / v) eps Delta
            * sqrt(|D(xi)|) / v
            * sum_j exp[-(sigma0^2/v^2)(E_j - E0)^2] exp(-T_j lam / 2)

with E_j = E_p + j Delta, T_j = L / sqrt(2 E_j), and D(xi) the stability
amplitude of the orbit.  D is the second mixed action derivative, which
for a billiard equals p / m12(xi) with the geometric monodromy element
m12; writing it via the momentum-free m12 alone (as the amplitude
1/m12) underestimates the enhancement by sqrt(v).  The profile diverges
like |m12|^(-1/2) at conjugate points, where the approximation is outside
its validity window and samples are excluded from scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import WindowModelParams
from .classical import PeriodicOrbit, monodromy_at
from .dynamics import AveragedField
from .geometry import Domain

CONJUGATE_EXCLUSION = 0.2
WALL_EXCLUSION = 0.1
# retro-reflecting corners are fold images of the full-stadium symmetry
# axes: the orbit self-crosses there and the single-traversal prediction
# breaks down the same way it does at a conjugate point
CORNER_EXCLUSION = 0.2
# the reference profiles live on the coarse output mesh (lattice 0.2),
# which suppresses de Broglie fringes; sampled profiles are smoothed to
# the same resolution before scoring
PROFILE_SMOOTH_WINDOW = 0.2
M12_SINGULAR = 1e-9


class SemiclassicsError(RuntimeError):
    pass


def smooth_term(domain: Domain) -> float:
    """Ergodic background: inverse billiard area."""
    return 1.0 / domain.area_exact


def _comb_sum(orbit: PeriodicOrbit, window: WindowModelParams) -> float:
    """sum_j envelope(E_j) exp(-T_j lam / 2) over the recurrence comb."""
    e_j = window.e_p + window.delta * window.comb_indices()
    e_j = e_j[e_j > 0]
    if len(e_j) == 0:
        raise SemiclassicsError("recurrence comb is empty inside the envelope")
    t_j = orbit.length / np.sqrt(2.0 * e_j)
    return float(np.sum(window.envelope(e_j) * np.exp(-t_j * window.lam / 2.0)))


def a_osc(orbit: PeriodicOrbit, window: WindowModelParams, xi: float) -> float:
    """Oscillatory on-orbit enhancement at arclength xi."""
    m12 = monodromy_at(orbit, xi).m12
    if abs(m12) < M12_SINGULAR:
        raise SemiclassicsError("conjugate point singularity")
    amplitude = 1.0 / math.sqrt(window.v * abs(m12))
    prefactor = (2.0 * math.sqrt(2.0) / math.pi) * (window.sigma0 / window.v) \
        * window.epsilon * window.delta * amplitude
    return prefactor * _comb_sum(orbit, window)


def a_osc_comb_integral(orbit: PeriodicOrbit, window: WindowModelParams,
                        xi: float, n_sub: int = 64) -> float:
    """a_osc with the j-sum replaced by its continuum integral (oracle).

    Valid check when Delta << v/sigma0: the envelope spans many comb
    teeth and sum and integral agree to O((Delta sigma0 / v)^2).
    """
    m12 = monodromy_at(orbit, xi).m12
    if abs(m12) < M12_SINGULAR:
        raise SemiclassicsError("conjugate point singularity")
    j = window.comb_indices()
    jj = np.linspace(j[0] - 0.5, j[-1] + 0.5, len(j) * n_sub)
    e = window.e_p + window.delta * jj
    keep = e > 0
    e, = (e[keep],)
    t = orbit.length / np.sqrt(2.0 * e)
    integral = np.trapezoid(window.envelope(e) * np.exp(-t * window.lam / 2.0), jj[keep])
    amplitude = 1.0 / math.sqrt(window.v * abs(m12))
    prefactor = (2.0 * math.sqrt(2.0) / math.pi) * (window.sigma0 / window.v) \
        * window.epsilon * window.delta * amplitude
    return prefactor * float(integral)


@dataclass
class ScarProfile:
    """On-orbit comparison of numerical and semiclassical time averages."""

    xi: np.ndarray
    a_num: np.ndarray
    a_sc: np.ndarray
    excluded: np.ndarray     # bool: inside a conjugate-point or wall window
    smooth: float
    orbit_length: float

    def pearson_r(self) -> float:
        """Correlation over non-excluded samples; nan when the prediction
        is constant (marginal orbits have xi-independent m12)."""
        keep = ~self.excluded
        if keep.sum() < 3:
            raise SemiclassicsError("too few non-excluded samples")
        if np.std(self.a_sc[keep]) < 1e-15 or np.std(self.a_num[keep]) < 1e-15:
            return float("nan")
        return float(np.corrcoef(self.a_num[keep], self.a_sc[keep])[0, 1])


def _cyclic_distance(xi: np.ndarray, centers: np.ndarray, length: float) -> np.ndarray:
    """Min distance from each xi to any center, on the circle of given length."""
    if len(centers) == 0:
        return np.full(len(xi), np.inf)
    d = np.abs(np.subtract.outer(xi, centers)) % length
    return np.minimum(d, length - d).min(axis=1)


def _cyclic_boxcar(values: np.ndarray, width: float, step: float) -> np.ndarray:
    n = max(1, int(round(width / step)))
    if n <= 1:
        return values
    kernel = np.ones(n) / n
    ext = np.concatenate([values[-n:], values, values[:n]])
    return np.convolve(ext, kernel, mode="same")[n:-n]


def scar_profile(orbit: PeriodicOrbit, averaged: AveragedField,
                 window: WindowModelParams, n_samples: int = 512,
                 conj_halfwidth: float = CONJUGATE_EXCLUSION,
                 wall_halfwidth: float = WALL_EXCLUSION,
                 corner_halfwidth: float = CORNER_EXCLUSION,
                 smooth_window: float = PROFILE_SMOOTH_WINDOW) -> ScarProfile:
    """Sample the averaged density along the orbit and attach the prediction."""
    from .classical import conjugate_points

    grid = averaged.grid
    x0, y0 = grid.origin
    x1, y1 = x0 + (grid.nx - 1) * grid.h, y0 + (grid.ny - 1) * grid.h
    for v in orbit.vertices:
        if not (x0 - 1e-9 <= v.point[0] <= x1 + 1e-9
                and y0 - 1e-9 <= v.point[1] <= y1 + 1e-9):
            raise SemiclassicsError("orbit leaves the grid coverage")

    step = orbit.length / n_samples
    xi = step * np.arange(n_samples)
    points = np.array([orbit.point_at(x) for x in xi])
    a_num = grid.sample(averaged.values, points).real
    a_num = _cyclic_boxcar(a_num, smooth_window, step)

    conj = np.asarray(conjugate_points(orbit))
    arcs = orbit.vertex_arclengths
    walls = np.array([s for s, v in zip(arcs, orbit.vertices) if v.kind != "corner"])
    corners = np.array([s for s, v in zip(arcs, orbit.vertices) if v.kind == "corner"])
    excluded = (_cyclic_distance(xi, conj, orbit.length) < conj_halfwidth) \
        | (_cyclic_distance(xi, walls, orbit.length) < wall_halfwidth) \
        | (_cyclic_distance(xi, corners, orbit.length) < corner_halfwidth)

    smooth = smooth_term(orbit.domain)
    a_sc = np.empty(n_samples)
    for i, x in enumerate(xi):
        try:
            a_sc[i] = smooth + a_osc(orbit, window, x)
        except SemiclassicsError:
            a_sc[i] = np.inf
            excluded[i] = True
    return ScarProfile(xi=xi, a_num=a_num, a_sc=a_sc, excluded=excluded,
                       smooth=smooth, orbit_length=orbit.length)


# --- profile CSV ----------------------------------------------------------------


def write_profile_csv(path, profile: ScarProfile) -> None:
    with open(path, "w") as f:
        f.write("xi,A_num,A_sc,excluded\n")
        for x, an, asc, ex in zip(profile.xi, profile.a_num, profile.a_sc,
                                  profile.excluded):
            f.write(f"{float(x)!r},{float(an)!r},{float(asc)!r},{int(ex)}\n")


def read_profile_csv(path) -> dict[str, np.ndarray]:
    xi, a_num, a_sc, excl = [], [], [], []
    with open(path) as f:
        header = f.readline().strip()
        if header != "xi,A_num,A_sc,excluded":
            raise SemiclassicsError(f"bad profile header: {header!r}")
        for line in f:
            a, b, c, d = line.rstrip("\n").split(",")
            xi.append(float(a))
            a_num.append(float(b))
            a_sc.append(float(c))
            excl.append(bool(int(d)))
    return {"xi": np.asarray(xi), "A_num": np.asarray(a_num),
            "A_sc": np.asarray(a_sc), "excluded": np.asarray(excl)}
