"""Weighted-spectrum analysis: smoothed deltas, window functions, peaks.

Everything here runs in natural units (hbar = m = 1).  The Lorentzian
half-width epsilon plays the role of the numerical energy resolution and
defaults to the mean level spacing of the basis in the pipeline; the
recurrence comb of a periodic orbit has spacing Delta = 2 pi v / L and
tooth width lambda (the orbit's Lyapunov rate, or the mean level spacing
for the marginal bouncing-ball family).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import EigenBasis

P_EPS = "p_eps"
WINDOW_MEASURED = "window_measured"
WINDOW_MODEL = "window_model"
SMOOTHED_HISTOGRAM = "smoothed_histogram"


class AnalysisError(RuntimeError):
    pass


def delta_lorentz(x, epsilon: float):
    """Lorentzian delta: (eps/pi) / (x^2 + eps^2)."""
    if epsilon <= 0:
        raise AnalysisError("epsilon must be positive")
    x = np.asarray(x, dtype=float)
    return (epsilon / math.pi) / (x * x + epsilon * epsilon)


def delta_bar(x, epsilon: float):
    """Squared-Lorentzian delta: 2 pi eps [delta_eps]^2 = (2 eps^3/pi)/(x^2+eps^2)^2."""
    if epsilon <= 0:
        raise AnalysisError("epsilon must be positive")
    x = np.asarray(x, dtype=float)
    q = x * x + epsilon * epsilon
    return (2.0 * epsilon ** 3 / math.pi) / (q * q)


@dataclass
class SmoothedSpectrum:
    e_grid: np.ndarray
    values: np.ndarray
    epsilon: float
    kind: str

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.e_grid))


def default_e_grid(e_lo: float, e_hi: float, epsilon: float,
                   pad: float = 300.0, step_frac: float = 6.0) -> np.ndarray:
    """Uniform energy grid wide and fine enough for Lorentzian quadrature."""
    lo = e_lo - pad * epsilon
    hi = e_hi + pad * epsilon
    n = int((hi - lo) / (epsilon / step_frac)) + 1
    return np.linspace(lo, hi, n)


def swsf(abs2: np.ndarray, energies: np.ndarray, epsilon: float,
         e_grid: np.ndarray) -> SmoothedSpectrum:
    """Smoothed weighted spectrum P_eps(E) = sum_n |c_n|^2 delta_eps(E - E_n)."""
    vals = delta_lorentz(np.subtract.outer(e_grid, energies), epsilon) @ abs2
    return SmoothedSpectrum(e_grid=e_grid, values=vals, epsilon=epsilon, kind=P_EPS)


def measured_window(abs2: np.ndarray, energies: np.ndarray, epsilon: float,
                    e_grid: np.ndarray) -> SmoothedSpectrum:
    """w(E) = -2 eps P_eps(E); stored negative, plotted as |w|."""
    p = swsf(abs2, energies, epsilon, e_grid)
    return SmoothedSpectrum(e_grid=e_grid, values=-2.0 * epsilon * p.values,
                            epsilon=epsilon, kind=WINDOW_MEASURED)


def smoothed_green_diag(basis: EigenBasis, r: tuple[float, float], epsilon: float,
                        e_grid: np.ndarray) -> np.ndarray:
    """Im G_eps(r, r; E) = -pi sum_n |phi_n(r)|^2 delta_eps(E - E_n)."""
    weights = _states_at(basis, r) ** 2
    return -math.pi * (delta_lorentz(np.subtract.outer(e_grid, basis.energies),
                                     epsilon) @ weights)


def _states_at(basis: EigenBasis, r) -> np.ndarray:
    idx, w = basis.grid.bilinear_weights(np.atleast_2d(r))
    padded = np.concatenate([basis.states, np.zeros((basis.n_states, 1))], axis=1)
    return (padded[:, idx[0]] * w[0]).sum(axis=1)


def smoothed_time_average(basis: EigenBasis, abs2: np.ndarray, r,
                          epsilon: float, e_grid: np.ndarray) -> float:
    """A_eps(r) = -2 eps Int P_eps(E) Im G_eps(r, r; E) dE (trapezoid)."""
    p = swsf(abs2, basis.energies, epsilon, e_grid)
    img = smoothed_green_diag(basis, r, epsilon, e_grid)
    return float(-2.0 * epsilon * np.trapezoid(p.values * img, e_grid))


@dataclass(frozen=True)
class WindowModelParams:
    """Recurrence-comb model of the window function.

    e_p anchors the comb (energy of the tallest measured peak), delta is
    the comb spacing 2 pi v / L, lam the Lorentzian tooth width, and the
    Gaussian envelope has width v / sigma0 about e0.
    """

    e_p: float
    delta: float
    lam: float
    sigma0: float
    v: float
    e0: float
    epsilon: float

    @property
    def envelope_width(self) -> float:
        return self.v / self.sigma0

    def envelope(self, e):
        de = (np.asarray(e, dtype=float) - self.e0) / self.envelope_width
        return np.exp(-de * de)

    def comb_indices(self, rel_tol: float = 1e-8) -> np.ndarray:
        """Comb teeth j with envelope above rel_tol of its maximum."""
        half = self.envelope_width * math.sqrt(math.log(1.0 / rel_tol))
        j_lo = math.ceil((self.e0 - half - self.e_p) / self.delta)
        j_hi = math.floor((self.e0 + half - self.e_p) / self.delta)
        return np.arange(j_lo, j_hi + 1)


def model_window(params: WindowModelParams, e_grid: np.ndarray) -> SmoothedSpectrum:
    """Poisson-resummed window: Gaussian envelope times a Lorentzian comb.

    w(E) = -2 eps (1/sqrt(pi)) (sigma0/v) exp(-sigma0^2 (E-E0)^2/v^2)
           * (Delta/pi) sum_n (lam/2) / ((E - E_p - n Delta)^2 + (lam/2)^2)
    """
    if params.delta <= 0 or params.lam <= 0:
        raise AnalysisError("comb spacing and width must be positive")
    e = np.asarray(e_grid, dtype=float)
    teeth = params.e_p + params.delta * params.comb_indices()
    half = params.lam / 2.0
    comb = (params.delta / math.pi) * np.sum(
        half / (np.subtract.outer(e, teeth) ** 2 + half * half), axis=1)
    env = (1.0 / math.sqrt(math.pi)) * (params.sigma0 / params.v) * params.envelope(e)
    return SmoothedSpectrum(e_grid=e, values=-2.0 * params.epsilon * env * comb,
                            epsilon=params.epsilon, kind=WINDOW_MODEL)


def autocorrelation_orbit_sum(params: WindowModelParams, t_grid: np.ndarray,
                              n_terms: int) -> np.ndarray:
    """Recurrence form: sum over orbit traversals n of Gaussian echoes.

    C(t) = sum_n exp{-v^2 (t - n tau)^2 / (4 sigma0^2) - i E0 (t - n tau)}
           * exp(-lam |t| / 2),  tau = 2 pi / Delta.
    """
    tau = 2.0 * math.pi / params.delta
    t = np.asarray(t_grid, dtype=float)
    c = np.zeros(len(t), dtype=complex)
    for n in range(-n_terms, n_terms + 1):
        dt = t - n * tau
        c += np.exp(-params.v ** 2 * dt ** 2 / (4.0 * params.sigma0 ** 2)
                    - 1j * params.e0 * dt)
    return c * np.exp(-params.lam * np.abs(t) / 2.0)


def autocorrelation_comb_sum(params: WindowModelParams, t_grid: np.ndarray,
                             n_terms: int) -> np.ndarray:
    """Poisson-resummed form of the same series, comb at E_n = n Delta."""
    t = np.asarray(t_grid, dtype=float)
    n = np.arange(-n_terms, n_terms + 1)
    e_n = params.delta * n
    weights = (params.delta / math.sqrt(math.pi)) * (params.sigma0 / params.v) \
        * np.exp(-params.sigma0 ** 2 * (e_n - params.e0) ** 2 / params.v ** 2)
    c = np.exp(-1j * np.outer(t, e_n)) @ weights
    return c * np.exp(-params.lam * np.abs(t) / 2.0)


def poisson_sum_check(params: WindowModelParams, t_grid: np.ndarray,
                      n_orbit_terms: int = 64, n_comb_terms: int = 4000) -> float:
    """Max pointwise difference between the two truncated series."""
    a = autocorrelation_orbit_sum(params, t_grid, n_orbit_terms)
    b = autocorrelation_comb_sum(params, t_grid, n_comb_terms)
    return float(np.max(np.abs(a - b)))


def smoothed_histogram(abs2: np.ndarray, energies: np.ndarray, width: float,
                       e_grid: np.ndarray) -> SmoothedSpectrum:
    """Boxcar average of the |c_n|^2 point masses, per unit energy."""
    if width <= 0:
        raise AnalysisError("histogram width must be positive")
    e = np.asarray(e_grid, dtype=float)
    inside = np.abs(np.subtract.outer(e, energies)) <= width / 2.0
    vals = (inside @ abs2) / width
    return SmoothedSpectrum(e_grid=e, values=vals, epsilon=width / 20.0,
                            kind=SMOOTHED_HISTOGRAM)


def find_peaks(spectrum: SmoothedSpectrum, rel_threshold: float = 0.1) -> np.ndarray:
    """Energies of local maxima of |values| above rel_threshold of the max."""
    v = np.abs(spectrum.values)
    floor = rel_threshold * v.max()
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]) & (v[1:-1] >= floor)
    return spectrum.e_grid[1:-1][inner]


def peak_spacing(spectrum: SmoothedSpectrum, rel_threshold: float = 0.1) -> float:
    """Median gap between consecutive qualifying local maxima."""
    peaks = find_peaks(spectrum, rel_threshold)
    if len(peaks) < 3:
        raise AnalysisError(f"need >= 3 qualifying peaks, found {len(peaks)}")
    return float(np.median(np.diff(peaks)))


# --- CSV formats --------------------------------------------------------------


def write_spectra_csv(path, spectra: list[SmoothedSpectrum]) -> None:
    with open(path, "w") as f:
        f.write("E,value,kind,epsilon\n")
        for s in spectra:
            for e, v in zip(s.e_grid, s.values):
                f.write(f"{float(e)!r},{float(v)!r},{s.kind},{float(s.epsilon)!r}\n")


def read_spectra_csv(path) -> dict[str, SmoothedSpectrum]:
    rows: dict[str, list[tuple[float, float, float]]] = {}
    with open(path) as f:
        header = f.readline().strip()
        if header != "E,value,kind,epsilon":
            raise AnalysisError(f"bad spectra header: {header!r}")
        for line in f:
            e, v, kind, eps = line.rstrip("\n").split(",")
            rows.setdefault(kind, []).append((float(e), float(v), float(eps)))
    out = {}
    for kind, data in rows.items():
        arr = np.asarray(data)
        out[kind] = SmoothedSpectrum(e_grid=arr[:, 0], values=arr[:, 1],
                                     epsilon=float(arr[0, 2]), kind=kind)
    return out


def write_coeffs_csv(path, energies: np.ndarray, c: np.ndarray) -> None:
    with open(path, "w") as f:
        f.write("n,E,re,im,abs2\n")
        for n, (e, cn) in enumerate(zip(energies, c)):
            f.write(f"{n},{float(e)!r},{float(cn.real)!r},{float(cn.imag)!r},"
                    f"{float(abs(cn) ** 2)!r}\n")


def read_coeffs_csv(path) -> tuple[np.ndarray, np.ndarray]:
    energies, cs = [], []
    with open(path) as f:
        header = f.readline().strip()
        if header != "n,E,re,im,abs2":
            raise AnalysisError(f"bad coefficients header: {header!r}")
        for line in f:
            _, e, re, im, _ = line.rstrip("\n").split(",")
            energies.append(float(e))
            cs.append(complex(float(re), float(im)))
    return np.asarray(energies), np.asarray(cs)
